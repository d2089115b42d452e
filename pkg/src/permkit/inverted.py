"""Inverted-file permutation indexes: the MI-file and NAPP.

Posting lists are stored flat: ``offsets[j]:offsets[j + 1]`` delimits the list
of pivot ``j`` inside the shared ``ids`` (and, for the MI-file, ``pos``) arrays.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dataset import DataSet
from .permutation import PivotSet, compute_permutation, compute_permutations, select_pivots
from .results import QueryResult, check_k, refine, resolve_gamma, smallest_by_key
from .spaces import Space

DEFAULT_CHUNK = 65536


def _check_mi(m_i: int, m: int):
    if not 1 <= m_i <= m:
        raise ValueError(f"m_i must be in [1, {m}], got {m_i}")


def _postings(perms: np.ndarray, m_i: int, m: int):
    """Group (position, id) pairs of each object's ``m_i`` closest pivots by pivot."""
    rows, cols = np.nonzero(perms <= m_i)
    pos = perms[rows, cols]
    order = np.lexsort((rows, pos, cols))
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=m), out=offsets[1:])
    return offsets, pos[order].astype(np.int32), rows[order].astype(np.int64)


def _pivots_for(dataset, m, rng_seed, pivots):
    return select_pivots(dataset, m, rng_seed) if pivots is None else pivots


# --------------------------------------------------------------------------
# MI-file


@dataclass(eq=False)
class MiFileIndex:
    dataset: DataSet
    space: Space
    pivots: PivotSet
    m_i: int
    offsets: np.ndarray
    pos: np.ndarray
    ids: np.ndarray
    rng_seed: int = 0
    kind = "mifile"

    @property
    def m(self) -> int:
        return self.pivots.m

    def posting_list(self, j: int) -> list[tuple[int, int]]:
        s, e = self.offsets[j], self.offsets[j + 1]
        return [(int(p), int(i)) for p, i in zip(self.pos[s:e], self.ids[s:e])]

    def search(self, query, k: int = 10, *, gamma, m_s=None, D=None, metric: str = "footrule") -> QueryResult:
        return knn_search_mifile(self, query, k, m_s, D, gamma=gamma, metric=metric)


def build_mifile(
    dataset: DataSet,
    space: Space,
    m: int = 128,
    m_i: int = 32,
    rng_seed: int = 0,
    pivots: PivotSet | None = None,
    num_threads: int | None = 1,
) -> MiFileIndex:
    space.validate(dataset)
    pivots = _pivots_for(dataset, m, rng_seed, pivots)
    _check_mi(m_i, pivots.m)
    perms = compute_permutations(dataset, pivots, space, num_threads)
    offsets, pos, ids = _postings(perms, m_i, pivots.m)
    return MiFileIndex(dataset, space, pivots, m_i, offsets, pos, ids, rng_seed)


def mifile_accumulate(index: MiFileIndex, query, m_s: int | None = None, D: int | None = None,
                      metric: str = "footrule", qperm: np.ndarray | None = None):
    """Truncated Footrule (or Spearman) estimates for every object.

    Returns ``(accumulators, touched, query_permutation)``.  Objects absent from
    every scanned posting keep the pessimistic initial value.
    """
    m = index.m
    m_s = index.m_i if m_s is None else m_s
    if not 1 <= m_s <= index.m_i:
        raise ValueError(f"m_s must be in [1, {index.m_i}], got {m_s}")
    if metric not in ("footrule", "spearman"):
        raise ValueError(f"unknown accumulator metric {metric!r}")
    if D is not None and D < 0:
        raise ValueError("D must be non-negative")
    if qperm is None:
        qperm = compute_permutation(query, index.pivots, index.space)
    full = m if metric == "footrule" else m * m
    n = len(index.dataset)
    acc = np.full(n, m_s * full, dtype=np.int64)
    touched = np.zeros(n, dtype=bool)
    for j in np.argsort(qperm, kind="stable")[:m_s]:
        s, e = int(index.offsets[j]), int(index.offsets[j + 1])
        qp = int(qperm[j])
        pos = index.pos[s:e]
        if D is not None:
            lo = int(np.searchsorted(pos, qp - D, side="left"))
            hi = int(np.searchsorted(pos, qp + D, side="right"))
            s, e, pos = s + lo, s + hi, pos[lo:hi]
        ids = index.ids[s:e]
        diff = np.abs(pos.astype(np.int64) - qp)
        acc[ids] -= full - (diff if metric == "footrule" else diff * diff)
        touched[ids] = True
    return acc, touched, qperm


def knn_search_mifile(index: MiFileIndex, query, k: int = 10, m_s: int | None = None, D: int | None = None,
                      *, gamma, metric: str = "footrule") -> QueryResult:
    check_k(k)
    t0 = time.perf_counter()
    n = len(index.dataset)
    count = resolve_gamma(gamma, n, k)
    acc, _, _ = mifile_accumulate(index, query, m_s, D, metric)
    cand = smallest_by_key(acc, count)
    ids, dists = refine(index.dataset, index.space, query, cand, k)
    return QueryResult(ids, dists, index.m + cand.size, cand.size, time.perf_counter() - t0, cand)


# --------------------------------------------------------------------------
# NAPP


@dataclass(eq=False)
class NappIndex:
    dataset: DataSet
    space: Space
    pivots: PivotSet
    m_i: int
    chunk_size: int
    offsets: np.ndarray
    ids: np.ndarray
    chunk_bounds: np.ndarray  # (m, n_chunks + 1) absolute positions into ``ids``
    rng_seed: int = 0
    kind = "napp"

    @property
    def m(self) -> int:
        return self.pivots.m

    def posting_list(self, j: int) -> list[int]:
        return [int(i) for i in self.ids[self.offsets[j] : self.offsets[j + 1]]]

    def search(self, query, k: int = 10, t: int = 1, gamma=None) -> QueryResult:
        return knn_search_napp(self, query, k, t, gamma)


def chunk_bounds_for(offsets: np.ndarray, ids: np.ndarray, n: int, chunk_size: int) -> np.ndarray:
    n_chunks = max(1, math.ceil(n / chunk_size))
    edges = np.arange(n_chunks + 1, dtype=np.int64) * chunk_size
    m = len(offsets) - 1
    out = np.empty((m, n_chunks + 1), dtype=np.int64)
    for j in range(m):
        s, e = offsets[j], offsets[j + 1]
        out[j] = s + np.searchsorted(ids[s:e], edges, side="left")
    return out


def build_napp(
    dataset: DataSet,
    space: Space,
    m: int = 512,
    m_i: int = 32,
    chunk_size: int = DEFAULT_CHUNK,
    rng_seed: int = 0,
    num_threads: int | None = 1,
    pivots: PivotSet | None = None,
) -> NappIndex:
    """Id-only posting lists over each object's ``m_i`` closest pivots."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    space.validate(dataset)
    pivots = _pivots_for(dataset, m, rng_seed, pivots)
    _check_mi(m_i, pivots.m)
    perms = compute_permutations(dataset, pivots, space, num_threads)
    rows, cols = np.nonzero((perms <= m_i).T)  # pivot-major, ids ascending inside each list
    offsets = np.zeros(pivots.m + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=pivots.m), out=offsets[1:])
    ids = cols.astype(np.int64)
    bounds = chunk_bounds_for(offsets, ids, len(dataset), chunk_size)
    return NappIndex(dataset, space, pivots, m_i, chunk_size, offsets, ids, bounds, rng_seed)


def napp_candidates(index: NappIndex, query, t: int = 1, gamma=None, k: int = 1,
                    qperm: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """ScanCount merge of the query's closest-pivot lists, chunk by chunk.

    Returns surviving ids and their shared-pivot counts.  With ``gamma`` set the
    survivors are ordered by decreasing count (then id) and capped.
    """
    if not 1 <= t <= index.m_i:
        raise ValueError(f"t must be in [1, {index.m_i}], got {t}")
    if qperm is None:
        qperm = compute_permutation(query, index.pivots, index.space)
    lists = np.nonzero(qperm <= index.m_i)[0]
    n = len(index.dataset)
    cs = index.chunk_size
    found_ids, found_counts = [], []
    for c in range(index.chunk_bounds.shape[1] - 1):
        base = c * cs
        parts = [index.ids[index.chunk_bounds[j, c] : index.chunk_bounds[j, c + 1]] for j in lists]
        parts = [p for p in parts if p.size]
        if not parts:
            continue
        # fresh zeroed counters for this chunk
        counters = np.bincount(np.concatenate(parts) - base, minlength=min(cs, n - base))
        hit = np.nonzero(counters >= t)[0]
        found_ids.append(hit + base)
        found_counts.append(counters[hit])
    if not found_ids:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    cand = np.concatenate(found_ids).astype(np.int64)
    counts = np.concatenate(found_counts).astype(np.int64)
    if gamma is not None:
        keep = smallest_by_key(-counts, resolve_gamma(gamma, n, k), ids=np.arange(cand.size))
        cand, counts = cand[keep], counts[keep]
    return cand, counts


def knn_search_napp(index: NappIndex, query, k: int = 10, t: int = 1, gamma=None) -> QueryResult:
    check_k(k)
    t0 = time.perf_counter()
    cand, _ = napp_candidates(index, query, t, gamma, k)
    ids, dists = refine(index.dataset, index.space, query, cand, k)
    return QueryResult(ids, dists, index.m + cand.size, cand.size, time.perf_counter() - t0, cand)
