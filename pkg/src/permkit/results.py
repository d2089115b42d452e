"""Query results, bounded selection helpers and the exact linear-scan baseline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataSet
from .spaces import Space


@dataclass
class QueryResult:
    """Ranked ``(id, distance)`` answer plus instrumentation."""

    ids: np.ndarray
    distances: np.ndarray
    distance_computations: int = 0
    candidates: int = 0
    elapsed: float = 0.0
    candidate_ids: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.ids)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.ids, self.distances)]


def top_k(ids: np.ndarray, dists: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` best entries ordered by (distance, id)."""
    ids = np.asarray(ids, dtype=np.int64)
    dists = np.asarray(dists, dtype=np.float64)
    if len(ids) > k:
        kth = np.partition(dists, k - 1)[k - 1]
        keep = dists <= kth
        ids, dists = ids[keep], dists[keep]
    order = np.lexsort((ids, dists))[:k]
    return ids[order], dists[order]


def smallest_by_key(values: np.ndarray, count: int, ids: np.ndarray | None = None) -> np.ndarray:
    """Ids of the ``count`` smallest integer ``values`` (ties to the smaller id), ascending.

    Uses linear-time partitioning followed by a sort of the selected part only.
    """
    values = np.asarray(values, dtype=np.int64)
    n = values.size
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    count = min(count, n)
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    span = int(ids.max()) + 1 if n else 1
    keys = values * span + ids
    if count < n:
        part = np.argpartition(keys, count - 1)[:count]
    else:
        part = np.arange(n)
    part = part[np.argsort(keys[part], kind="stable")]
    return ids[part]


def resolve_gamma(gamma, n: int, k: int) -> int:
    """Candidate budget as a count: floats in (0, 1] are fractions of ``n`` (rounded up)."""
    if isinstance(gamma, (float, np.floating)):
        g = float(gamma)
        if not 0.0 < g <= 1.0:
            raise ValueError(f"fractional gamma must be in (0, 1], got {g}")
        count = math.ceil(round(g * n, 9))
    else:
        count = int(gamma)
    if count < min(k, n) or count < 1:
        raise ValueError(f"gamma ({count}) must be >= k ({k})")
    return min(count, n)


def refine(data: DataSet, space: Space, query, cand: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    cand = np.asarray(cand, dtype=np.int64)
    if cand.size == 0:
        return cand, np.zeros(0)
    return top_k(cand, space.query_distances(data, query, cand), k)


def check_k(k: int):
    if k < 1:
        raise ValueError("k must be >= 1")


@dataclass(eq=False)
class ExactIndex:
    """Linear scan in the original space; the reference every method is timed against."""

    dataset: DataSet
    space: Space
    kind = "bruteforce"

    def search(self, query, k: int = 10) -> QueryResult:
        return knn_search_exact(self, query, k)


def build_exact(dataset: DataSet, space: Space) -> ExactIndex:
    space.validate(dataset)
    return ExactIndex(dataset, space)


def knn_search_exact(index: ExactIndex, query, k: int = 10) -> QueryResult:
    check_k(k)
    t0 = time.perf_counter()
    n = len(index.dataset)
    if n == 0:
        return QueryResult(np.zeros(0, dtype=np.int64), np.zeros(0))
    dists = index.space.query_distances(index.dataset, query)
    ids, d = top_k(np.arange(n, dtype=np.int64), dists, k)
    return QueryResult(ids, d, n, n, time.perf_counter() - t0)


def recall(result_ids, gold_ids, k: int | None = None) -> float:
    """Fraction of the true neighbours present in ``result_ids``."""
    gold = np.asarray(gold_ids).reshape(-1)
    if k is None:
        k = gold.size
    gold = gold[:k]
    denom = min(k, gold.size)
    if denom == 0:
        return 1.0
    return float(np.intersect1d(np.asarray(result_ids).reshape(-1), gold).size) / denom
