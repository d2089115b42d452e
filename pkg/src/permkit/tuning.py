"""Parameter search for every method against a target recall band.

Each candidate setting is scored on held-out queries from the tuning sample.
Efficiency is index size divided by mean distance evaluations per query
(filter-stage pivot distances included), so results do not depend on timer
noise and repeat exactly for a given seed.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .dataset import DataSet
from .evaluation import compute_gold, mean_recall
from .methods import METHODS, MethodConfig, build_index, search_index
from .spaces import Space
from .vptree import TuneResult, VpTuneGrid, band_score, in_band, split_sample, tune_vptree

DEFAULT_BAND = (0.85, 0.95)
GAMMA_FRACTIONS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


def _gamma_counts(n: int, k: int, fractions=GAMMA_FRACTIONS) -> list[int]:
    return sorted({min(n, max(k, math.ceil(round(f * n, 9)))) for f in fractions})


def _grid(method: str, base: dict, n: int, k: int) -> tuple[list[dict], list[dict]]:
    """(build settings, query settings) to sweep; ``base`` values are held fixed."""
    cfg = MethodConfig(method, base)
    b = cfg.build_kwargs()
    if method == "napp":
        return [b], [{"t": t} for t in range(1, b["m_i"] + 1)]
    if method == "permfilter":
        return [b], [{"gamma": g} for g in _gamma_counts(n, k)]
    if method == "mifile":
        m, m_i = b["m"], b["m_i"]
        ms_vals = sorted({max(1, m_i // 4), max(1, m_i // 2), m_i})
        d_vals = [None, max(1, m // 2), max(1, m // 4)]
        return [b], [{"gamma": g, "m_s": s, "D": d}
                     for g, s, d in itertools.product(_gamma_counts(n, k), ms_vals, d_vals)]
    if method == "swgraph":
        return ([{"nn": nn, "attempts": 2} for nn in (5, 10, 20)],
                [{"query_attempts": a} for a in (1, 2, 4, 8, 16, 32)])
    if method == "bruteforce":
        return [b], [{}]
    raise ValueError(f"no tuning grid for {method!r}")


def tune(
    method: str,
    sample: DataSet,
    space: Space,
    band=DEFAULT_BAND,
    k: int = 10,
    num_queries: int = 50,
    base_params: dict | None = None,
    rng_seed: int = 0,
    num_threads=1,
    vp_grid: VpTuneGrid = VpTuneGrid(),
) -> TuneResult:
    """Best-scoring parameters: inside the band with the highest efficiency, else closest to it."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    lo, hi = band
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("band must satisfy 0 <= low <= high <= 1")
    base = dict(base_params or {})
    if method == "vptree":
        return tune_vptree(sample, space, band, k, vp_grid, num_queries,
                           int(base.get("bucket_size", 50)), base.get("beta"), rng_seed)
    index_ids, query_ids = split_sample(len(sample), num_queries, rng_seed)
    data, queries = sample.subset(index_ids), sample.subset(query_ids)
    gold = compute_gold(data, queries, space, k, 0, num_threads)
    n = len(data)
    builds, settings = _grid(method, base, n, k)
    trace, best = [], None
    for bparams in builds:
        index = build_index(MethodConfig(method, {**base, **bparams}), data, space, rng_seed, num_threads)
        for qparams in settings:
            cfg = MethodConfig(method, {**base, **bparams, **qparams})
            try:
                res = [search_index(cfg, index, queries[i], k) for i in range(len(queries))]
            except ValueError as exc:  # e.g. a budget below k
                trace.append({**cfg.resolved(), "error": str(exc)})
                continue
            rec = mean_recall(res, gold)
            eff = n / max(float(np.mean([r.distance_computations for r in res])), 1.0)
            params = cfg.resolved()
            trace.append({**params, "recall": rec, "efficiency": eff})
            score = band_score(rec, eff, band)
            if best is None or score > best[0]:
                best = (score, params, rec, eff)
    if best is None:
        raise ValueError("no parameter setting could be evaluated")
    _, params, rec, eff = best
    return TuneResult(params, rec, eff, in_band(rec, band), trace)
