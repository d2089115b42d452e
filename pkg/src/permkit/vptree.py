"""VP-tree with a polynomial pruner for generic (possibly non-metric) spaces.

The tree is stored flat.  Node ``i`` is either internal (``pivot[i] >= 0``,
children ``left[i]`` / ``right[i]``, ``-1`` for an empty child) or a leaf whose
bucket is ``order[bstart[i]:bend[i]]``; bucket members are also copied into
``bucket_data`` in the same order so each bucket is one contiguous block.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataSet
from .permutation import make_rng
from .results import QueryResult, build_exact, check_k, recall
from .spaces import Space, SpaceKind


@dataclass(frozen=True)
class PrunerParams:
    alpha_left: float = 1.0
    alpha_right: float = 1.0
    beta: int = 1

    def __post_init__(self):
        if not (self.alpha_left > 0 and self.alpha_right > 0):
            raise ValueError("alpha_left and alpha_right must be positive")
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")

    @classmethod
    def for_space(cls, space: Space, alpha_left: float = 1.0, alpha_right: float = 1.0) -> "PrunerParams":
        return cls(alpha_left, alpha_right, default_beta(space))


def default_beta(space: Space) -> int:
    return 2 if space.kind is SpaceKind.KL else 1


@dataclass(eq=False)
class VpTree:
    dataset: DataSet
    space: Space
    bucket_size: int
    pivot: np.ndarray
    radius: np.ndarray
    left: np.ndarray
    right: np.ndarray
    bstart: np.ndarray
    bend: np.ndarray
    order: np.ndarray
    rng_seed: int = 0
    pivot_data: DataSet = field(init=False, repr=False)
    bucket_data: DataSet = field(init=False, repr=False)
    kind = "vptree"

    def __post_init__(self):
        self.pivot_data = self.dataset.subset(np.maximum(self.pivot, 0))
        self.bucket_data = self.dataset.subset(self.order)

    @property
    def n_nodes(self) -> int:
        return len(self.pivot)

    def search(self, query, k: int = 10, params: PrunerParams | None = None) -> QueryResult:
        return knn_search_vptree(self, query, k, params)


def build_vptree(dataset: DataSet, space: Space, bucket_size: int = 50, rng_seed: int = 0) -> VpTree:
    """Recursive median-radius ball partitioning around random pivots."""
    if bucket_size < 1:
        raise ValueError("bucket_size must be >= 1")
    space.validate(dataset)
    rng = make_rng(rng_seed)
    pivot, radius, left, right, bstart, bend = [], [], [], [], [], []
    order: list[np.ndarray] = []
    n_ordered = 0

    def new_node() -> int:
        for lst in (pivot, left, right, bstart, bend):
            lst.append(-1)
        radius.append(0.0)
        return len(pivot) - 1

    root = new_node() if len(dataset) else None
    # (node slot, ids) work list; children are filled in place
    stack = [(root, np.arange(len(dataset), dtype=np.int64))] if root is not None else []
    while stack:
        node, ids = stack.pop()
        if ids.size <= bucket_size:
            bstart[node] = n_ordered
            order.append(ids)
            n_ordered += ids.size
            bend[node] = n_ordered
            continue
        p = int(ids[rng.integers(ids.size)])
        rest = ids[ids != p]
        dist = space.reverse_query_distances(dataset[p], dataset, rest)
        r = float(np.median(dist))
        pivot[node], radius[node] = p, r
        inner, outer = rest[dist <= r], rest[dist > r]
        if outer.size:
            right[node] = new_node()
            stack.append((right[node], outer))
        if inner.size:
            left[node] = new_node()
            stack.append((left[node], inner))

    def arr(x, dtype):
        return np.array(x, dtype=dtype)

    return VpTree(
        dataset, space, bucket_size,
        arr(pivot, np.int64), arr(radius, np.float64), arr(left, np.int64), arr(right, np.int64),
        arr(bstart, np.int64), arr(bend, np.int64),
        np.concatenate(order) if order else np.zeros(0, dtype=np.int64),
        rng_seed,
    )


class _KBest:
    """The k best (distance, id) pairs seen so far; ``radius`` is the k-th distance."""

    def __init__(self, k: int):
        self.k = k
        self.heap: list[tuple[float, int]] = []  # (-dist, -id): max-heap on (dist, id)

    @property
    def radius(self) -> float:
        return -self.heap[0][0] if len(self.heap) == self.k else math.inf

    def offer(self, d: float, i: int):
        if len(self.heap) < self.k:
            heapq.heappush(self.heap, (-d, -i))
        elif (d, i) < (-self.heap[0][0], -self.heap[0][1]):
            heapq.heapreplace(self.heap, (-d, -i))

    def result(self):
        pairs = sorted((-d, -i) for d, i in self.heap)
        return (np.array([i for _, i in pairs], dtype=np.int64), np.array([d for d, _ in pairs], dtype=np.float64))


def knn_search_vptree(tree: VpTree, query, k: int = 10, params: PrunerParams | None = None) -> QueryResult:
    """Decreasing-radius range search, closer child first, polynomial pruning of the other."""
    check_k(k)
    if params is None:
        params = PrunerParams.for_space(tree.space)
    t0 = time.perf_counter()
    best = _KBest(k)
    n_dist = 0
    if tree.n_nodes == 0:
        return QueryResult(np.zeros(0, dtype=np.int64), np.zeros(0), 0, 0, 0.0)
    space, al, ar, beta = tree.space, params.alpha_left, params.alpha_right, params.beta
    # entries: (node, None) to visit, or (node, margin, alpha) to visit unless pruned
    stack: list[tuple] = [(0, None, None)]
    while stack:
        node, margin, alpha = stack.pop()
        if node < 0:
            continue
        if margin is not None and margin ** beta * alpha > best.radius:
            continue
        p = tree.pivot[node]
        if p < 0:
            s, e = tree.bstart[node], tree.bend[node]
            if e > s:
                dist = space.query_distances(tree.bucket_data, query, slice(s, e))
                n_dist += e - s
                r = best.radius
                ids = tree.order[s:e]
                for j in np.nonzero(dist <= r)[0] if r < math.inf else range(e - s):
                    best.offer(float(dist[j]), int(ids[j]))
            continue
        dq = float(space.query_distances(tree.pivot_data, query, slice(node, node + 1))[0])
        n_dist += 1
        best.offer(dq, int(p))
        R = tree.radius[node]
        if dq <= R:
            stack.append((tree.right[node], R - dq, al))
            stack.append((tree.left[node], None, None))
        else:
            stack.append((tree.left[node], dq - R, ar))
            stack.append((tree.right[node], None, None))
    ids, dists = best.result()
    return QueryResult(ids, dists, n_dist, n_dist, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# pruner tuning


@dataclass(frozen=True)
class VpTuneGrid:
    """Log2-spaced grid over both alphas, shrunk around the best cell each round."""

    log2_min: float = -10.0
    log2_max: float = 10.0
    points: int = 9
    shrink: float = 2.0
    max_iter: int = 8

    def validate(self):
        if self.points < 1 or self.log2_max < self.log2_min:
            raise ValueError("empty tuning grid")
        if self.shrink <= 1.0 or self.max_iter < 1:
            raise ValueError("shrink must be > 1 and max_iter >= 1")


@dataclass
class TuneResult:
    params: dict
    recall: float
    efficiency: float
    reached: bool
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"params": self.params, "recall": self.recall, "efficiency": self.efficiency,
                "reached": self.reached, "unreached": not self.reached, "trace": self.trace}


def in_band(value: float, band) -> bool:
    return band[0] - 1e-12 <= value <= band[1] + 1e-12


def band_score(rec: float, eff: float, band) -> tuple:
    """Order candidates: in-band first by efficiency, otherwise by closeness to the band."""
    if in_band(rec, band):
        return (1, eff)
    gap = band[0] - rec if rec < band[0] else rec - band[1]
    return (0, -gap, eff)


def split_sample(n: int, num_queries: int, rng_seed: int):
    if not 0 < num_queries < n:
        raise ValueError(f"need 0 < num_queries < {n}")
    perm = make_rng(rng_seed).permutation(n)
    return np.sort(perm[num_queries:]), perm[:num_queries]


def tune_vptree(
    sample: DataSet,
    space: Space,
    band=(0.85, 0.95),
    k: int = 10,
    grid: VpTuneGrid = VpTuneGrid(),
    num_queries: int = 50,
    bucket_size: int = 50,
    beta: int | None = None,
    rng_seed: int = 0,
) -> TuneResult:
    """Shrinking-grid search for (alpha_left, alpha_right).

    Efficiency is measured as index size over mean distance evaluations per
    query, which keeps the outcome reproducible.
    """
    grid.validate()
    beta = default_beta(space) if beta is None else beta
    index_ids, query_ids = split_sample(len(sample), num_queries, rng_seed)
    data, queries = sample.subset(index_ids), sample.subset(query_ids)
    tree = build_vptree(data, space, bucket_size, rng_seed)
    exact = build_exact(data, space)
    gold = [exact.search(queries[i], k).ids for i in range(len(queries))]
    cache: dict[tuple[float, float], tuple[float, float]] = {}
    trace = []

    def evaluate(la: float, lb: float):
        key = (la, lb)
        if key not in cache:
            params = PrunerParams(2.0 ** la, 2.0 ** lb, beta)
            recs, comps = [], []
            for i in range(len(queries)):
                res = knn_search_vptree(tree, queries[i], k, params)
                recs.append(recall(res.ids, gold[i], k))
                comps.append(res.distance_computations)
            rec, eff = float(np.mean(recs)), len(data) / max(float(np.mean(comps)), 1.0)
            cache[key] = (rec, eff)
            trace.append({"alpha_left": params.alpha_left, "alpha_right": params.alpha_right,
                          "beta": beta, "recall": rec, "efficiency": eff})
        return cache[key]

    center = ((grid.log2_min + grid.log2_max) / 2,) * 2
    half = (grid.log2_max - grid.log2_min) / 2
    best = None
    for _ in range(grid.max_iter):
        axis = [np.linspace(c - half, c + half, grid.points) if grid.points > 1 else np.array([c]) for c in center]
        for la in axis[0]:
            for lb in axis[1]:
                la_, lb_ = float(la), float(lb)
                rec, eff = evaluate(la_, lb_)
                score = band_score(rec, eff, band)
                if best is None or score > best[0]:
                    best = (score, la_, lb_)
        center = (best[1], best[2])
        step = 2 * half / max(grid.points - 1, 1)
        if step < math.log2(1.01):
            break
        half /= grid.shrink
    rec, eff = cache[(best[1], best[2])]
    params = {"alpha_left": 2.0 ** best[1], "alpha_right": 2.0 ** best[2], "beta": beta}
    return TuneResult(params, rec, eff, in_band(rec, band), trace)
