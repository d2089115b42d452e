"""Evaluation protocol: splits, cached gold standards, benchmarks and projection analyses."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dataset import DataKind, DataSet
from .methods import MethodConfig, build_index, search_index
from .permfilter import build_permfilter, permutation_distances
from .permutation import compute_permutation, compute_permutations, make_rng, select_pivots, worker_count
from .results import ExactIndex, knn_search_exact, recall, top_k
from .snapshot import SnapshotError, index_bytes, read_container, write_container
from .spaces import Space


@dataclass(frozen=True)
class Split:
    split_id: int
    index_ids: np.ndarray  # ascending
    query_ids: np.ndarray

    def parts(self, dataset: DataSet) -> tuple[DataSet, DataSet]:
        return dataset.subset(self.index_ids), dataset.subset(self.query_ids)


def make_splits(dataset: DataSet, num_splits: int = 5, queries_per_split: int = 1000, rng_seed: int = 0) -> list[Split]:
    """Independent random (index, query) partitions; query ids keep their drawn order."""
    n = len(dataset)
    if num_splits < 1:
        raise ValueError("num_splits must be >= 1")
    if not 0 < queries_per_split < n:
        raise ValueError(f"queries_per_split must be in (0, {n})")
    rng = make_rng(rng_seed)
    out = []
    for s in range(num_splits):
        perm = rng.permutation(n)
        out.append(Split(s, np.sort(perm[queries_per_split:]), perm[:queries_per_split].copy()))
    return out


# --------------------------------------------------------------------------
# gold standard


@dataclass(eq=False)
class GoldStandard:
    ids: np.ndarray  # (num_queries, min(k, index size)), rows ordered by (distance, id)
    distances: np.ndarray
    k: int
    space_kind: str
    split_id: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    def save(self, path):
        write_container(path, {"gold": True, "k": self.k, "space_kind": self.space_kind, "split_id": self.split_id},
                        {"ids": self.ids, "distances": self.distances})

    @classmethod
    def load(cls, path) -> "GoldStandard":
        meta, arrays = read_container(path)
        if not meta.get("gold"):
            raise SnapshotError(f"{path}: not a gold-standard file")
        return cls(arrays["ids"], arrays["distances"], meta["k"], meta["space_kind"], meta["split_id"])


def compute_gold(index_part: DataSet, query_part: DataSet, space: Space, k: int = 10,
                 split_id: int = 0, num_threads: int | None = 1) -> GoldStandard:
    """Exhaustive k-NN of every query; may use several threads across queries."""
    exact = ExactIndex(index_part, space)
    kk = min(k, len(index_part))

    def one(i):
        return knn_search_exact(exact, query_part[i], k)

    nq = len(query_part)
    workers = worker_count(num_threads)
    if workers > 1 and nq > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one, range(nq)))
    else:
        res = [one(i) for i in range(nq)]
    ids = np.array([r.ids for r in res], dtype=np.int64).reshape(nq, kk)
    dists = np.array([r.distances for r in res], dtype=np.float64).reshape(nq, kk)
    return GoldStandard(ids, dists, k, space.kind.value, split_id)


def mean_recall(results, gold: GoldStandard) -> float:
    if len(results) == 0:
        return 1.0
    return float(np.mean([recall(r.ids, gold.ids[i], gold.k) for i, r in enumerate(results)]))


# --------------------------------------------------------------------------
# benchmarks

WALL_CLOCK_FIELDS = ("build_time_ms", "mean_query_time_ms", "bruteforce_query_time_ms", "improvement_in_efficiency")


@dataclass
class SplitReport:
    method: str
    split: int
    recall: float | None = None
    mean_query_time_ms: float | None = None
    bruteforce_query_time_ms: float | None = None
    improvement_in_efficiency: float | None = None
    distance_computations: float | None = None
    candidates: float | None = None
    build_time_ms: float | None = None
    index_bytes: int | None = None
    error: str | None = None


@dataclass
class BenchReport:
    method: str
    params: dict
    k: int
    splits: list[SplitReport] = field(default_factory=list)

    def _ok(self):
        return [s for s in self.splits if s.error is None]

    def _mean(self, name):
        vals = [getattr(s, name) for s in self._ok()]
        return float(np.mean(vals)) if vals else None

    @property
    def recall(self):
        return self._mean("recall")

    @property
    def mean_query_time_ms(self):
        return self._mean("mean_query_time_ms")

    @property
    def improvement_in_efficiency(self):
        bf, t = self._mean("bruteforce_query_time_ms"), self.mean_query_time_ms
        return None if bf is None or not t else bf / t

    def summary(self) -> dict:
        return {
            "method": self.method, "params": self.params, "k": self.k,
            "recall": self.recall, "improvement_in_efficiency": self.improvement_in_efficiency,
            "mean_query_time_ms": self.mean_query_time_ms,
            "distance_computations": self._mean("distance_computations"),
            "candidates": self._mean("candidates"), "build_time_ms": self._mean("build_time_ms"),
            "index_bytes": self._mean("index_bytes"), "failed_splits": len(self.splits) - len(self._ok()),
        }


def timed_queries(search, queries: DataSet, warmup: bool = True):
    """Run ``search`` over all queries; returns (results, mean milliseconds per query).

    With ``warmup`` the whole query set is answered once untimed first.
    """
    if warmup:
        for i in range(len(queries)):
            search(queries[i])
    results = []
    t0 = time.perf_counter()
    for i in range(len(queries)):
        results.append(search(queries[i]))
    elapsed = time.perf_counter() - t0
    return results, 1000.0 * elapsed / max(len(queries), 1)


@dataclass
class _SplitContext:
    split: Split
    index_part: DataSet
    query_part: DataSet
    gold: GoldStandard
    bf_ms: float


def prepare_split(dataset: DataSet, space: Space, split: Split, k: int, warmup: bool = True,
                  num_threads=1, gold: GoldStandard | None = None) -> _SplitContext:
    index_part, query_part = split.parts(dataset)
    if gold is None:
        gold = compute_gold(index_part, query_part, space, k, split.split_id, num_threads)
    exact = ExactIndex(index_part, space)
    _, bf_ms = timed_queries(lambda q: knn_search_exact(exact, q, k), query_part, warmup)
    return _SplitContext(split, index_part, query_part, gold, bf_ms)


def bench_split(config: MethodConfig, space: Space, ctx: _SplitContext, k: int, rng_seed: int = 0,
                warmup: bool = True, num_threads=1) -> SplitReport:
    rep = SplitReport(config.name, ctx.split.split_id, bruteforce_query_time_ms=ctx.bf_ms)
    try:
        t0 = time.perf_counter()
        index = build_index(config, ctx.index_part, space, rng_seed, num_threads)
        rep.build_time_ms = 1000.0 * (time.perf_counter() - t0)
        rep.index_bytes = index_bytes(index)
        results, ms = timed_queries(lambda q: search_index(config, index, q, k), ctx.query_part, warmup)
    except (ValueError, ArithmeticError, MemoryError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        return rep
    rep.recall = mean_recall(results, ctx.gold)
    rep.mean_query_time_ms = ms
    rep.improvement_in_efficiency = ctx.bf_ms / ms if ms > 0 else math.inf
    rep.distance_computations = float(np.mean([r.distance_computations for r in results])) if results else 0.0
    rep.candidates = float(np.mean([r.candidates for r in results])) if results else 0.0
    return rep


def run_benchmark_suite(configs: list[MethodConfig], dataset: DataSet, space: Space, k: int = 10,
                        splits: list[Split] | None = None, rng_seed: int = 0, warmup: bool = True,
                        num_threads=1) -> list[BenchReport]:
    """Benchmark several methods against the same splits, gold lists and brute-force timings.

    Query loops run on one thread; ``num_threads`` only reaches index builds
    and the gold computation.
    """
    if splits is None:
        splits = make_splits(dataset, 5, min(1000, max(1, len(dataset) // 10)), rng_seed)
    reports = [BenchReport(c.name, c.resolved(), k) for c in configs]
    for split in splits:
        ctx = prepare_split(dataset, space, split, k, warmup, num_threads)
        for rep, cfg in zip(reports, configs):
            rep.splits.append(bench_split(cfg, space, ctx, k, rng_seed, warmup, num_threads))
    return reports


def run_benchmark(config: MethodConfig, dataset: DataSet, space: Space, k: int = 10,
                  splits: list[Split] | None = None, rng_seed: int = 0, warmup: bool = True,
                  num_threads=1) -> BenchReport:
    return run_benchmark_suite([config], dataset, space, k, splits, rng_seed, warmup, num_threads)[0]


def strip_wall_clock(record):
    """Copy of a report record with timing fields removed (for reproducibility checks)."""
    if isinstance(record, dict):
        return {k: strip_wall_clock(v) for k, v in record.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(record, list):
        return [strip_wall_clock(v) for v in record]
    return record


def split_records(reports: list[BenchReport], run_config: dict | None = None) -> list[dict]:
    rows = []
    for rep in reports:
        for s in rep.splits:
            row = {**asdict(s), "params": rep.params, "k": rep.k, "version": __version__}
            if run_config is not None:
                row["config"] = run_config
            rows.append(row)
    return rows


def write_jsonl(records: list[dict], path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


CSV_COLUMNS = ("method", "split", "recall", "improvement_in_efficiency", "mean_query_time_ms",
               "bruteforce_query_time_ms", "distance_computations", "candidates", "build_time_ms",
               "index_bytes", "error", "params")


def write_csv(records: list[dict], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([json.dumps(r["params"], sort_keys=True) if c == "params" else r.get(c) for c in CSV_COLUMNS])


# --------------------------------------------------------------------------
# projection analyses

PROJECTED_DISTANCES = ("l2", "footrule", "spearman")


def _projected(perms: np.ndarray, ia: np.ndarray, ib: np.ndarray, kind: str) -> np.ndarray:
    diff = perms[ia].astype(np.int64) - perms[ib].astype(np.int64)
    if kind == "footrule":
        return np.abs(diff).sum(axis=1).astype(np.float64)
    sq = (diff * diff).sum(axis=1).astype(np.float64)
    return np.sqrt(sq) if kind == "l2" else sq


def project(sample: DataSet, space: Space, m: int, projector: str = "permutation", rng_seed: int = 0,
            num_threads=1) -> np.ndarray:
    """Map every sample object to a vector: pivot ranks, or a Gaussian random projection (dense only)."""
    if projector == "permutation":
        pivots = select_pivots(sample, m, rng_seed)
        return compute_permutations(sample, pivots, space, num_threads)
    if projector == "random-projection":
        if sample.kind is not DataKind.DENSE:
            raise ValueError("random projection needs dense vectors")
        R = make_rng(rng_seed).standard_normal((sample.objects.shape[1], m)) / math.sqrt(m)
        return sample.objects @ R
    raise ValueError(f"unknown projector {projector!r}")


def projection_scatter(sample: DataSet, space: Space, m: int = 64, num_pairs: int = 20_000,
                       random_share: float = 0.5, neighbors: int = 100, projector: str = "permutation",
                       perm_distance: str = "l2", rng_seed: int = 0, num_threads=1) -> np.ndarray:
    """``(original, projected)`` distances for pairs from two strata.

    The first stratum holds uniformly random pairs; the second pairs an anchor
    with one of its ``neighbors`` exact nearest neighbours.  The anchor plays
    the query role in the original distance.
    """
    n = len(sample)
    if n < 2:
        raise ValueError("need at least two objects")
    if not 0.0 <= random_share <= 1.0:
        raise ValueError("random_share must be in [0, 1]")
    if perm_distance not in PROJECTED_DISTANCES:
        raise ValueError(f"perm_distance must be one of {PROJECTED_DISTANCES}")
    rng = make_rng(rng_seed)
    n_rand = int(round(num_pairs * random_share))
    n_nn = num_pairs - n_rand
    qa = rng.integers(0, n, size=n_rand)
    qb = (qa + rng.integers(1, n, size=n_rand)) % n  # never the anchor itself
    anchors = rng.integers(0, n, size=n_nn)
    picks = rng.integers(0, min(neighbors, n - 1), size=n_nn)
    nb = np.empty(n_nn, dtype=np.int64)
    all_ids = np.arange(n, dtype=np.int64)
    for a in np.unique(anchors):
        sel = anchors == a
        d = space.query_distances(sample, sample[int(a)])
        keep = all_ids != a
        nn_ids, _ = top_k(all_ids[keep], d[keep], min(neighbors, n - 1))
        nb[sel] = nn_ids[picks[sel]]
    ia = np.concatenate([qa, anchors])
    ib = np.concatenate([qb, nb])
    if space.query_mode == "left":
        orig = space.paired(sample, ib, sample, ia)
    else:
        orig = space.paired(sample, ia, sample, ib)
    proj = project(sample, space, m, projector, rng_seed, num_threads)
    if projector == "permutation":
        pd = _projected(proj, ia, ib, perm_distance)
    else:
        pd = np.sqrt(((proj[ia] - proj[ib]) ** 2).sum(axis=1))
    return np.column_stack([orig, pd])


@dataclass
class RecallCurve:
    fractions: list[float]
    candidates: list[int]
    recall: list[float]

    def rows(self):
        return list(zip(self.fractions, self.candidates, self.recall))


def recall_vs_fraction_curve(sample: DataSet, space: Space, m: int = 128, k: int = 10,
                             fractions=(0.001, 0.01, 0.1, 1.0), num_queries: int = 100,
                             perm_distance: str = "spearman", rng_seed: int = 0, num_threads=1) -> RecallCurve:
    """Recall of permutation filtering as the candidate fraction grows.

    Candidates are the closest stored permutations under ``perm_distance``
    (ties by id); each fraction takes a prefix of the same ranking, so the
    curve cannot decrease.  A true neighbour that survives filtering is
    always kept by refinement, so recall equals the share of gold ids among
    the candidates.
    """
    n = len(sample)
    if not 0 < num_queries < n:
        raise ValueError(f"num_queries must be in (0, {n})")
    split = make_splits(sample, 1, num_queries, rng_seed)[0]
    index_part, query_part = split.parts(sample)
    gold = compute_gold(index_part, query_part, space, k, 0, num_threads)
    index = build_permfilter(index_part, space, m=m, rng_seed=rng_seed, num_threads=num_threads)
    N = len(index_part)
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("fractions must be in (0, 1]")
    counts = [min(N, max(1, math.ceil(round(f * N, 9)))) for f in fractions]
    hits = np.zeros(len(fractions))
    ids = np.arange(N, dtype=np.int64)
    for i in range(len(query_part)):
        qperm = compute_permutation(query_part[i], index.pivots, space)
        pd = permutation_distances(index, qperm, perm_distance)
        order = np.lexsort((ids, pd))
        rank = np.empty(N, dtype=np.int64)
        rank[order] = np.arange(N)
        gold_rank = rank[gold.ids[i]]
        for j, c in enumerate(counts):
            hits[j] += np.count_nonzero(gold_rank < c)
    denom = len(query_part) * min(k, N)
    return RecallCurve(list(map(float, fractions)), counts, [float(h / denom) for h in hits])
