"""Small-world proximity graph: search-based insertion and multi-restart greedy search."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import DataSet
from .permutation import make_rng
from .results import QueryResult, check_k, top_k
from .spaces import Space


@dataclass(eq=False)
class ProximityGraph:
    dataset: DataSet
    space: Space
    nn: int
    attempts: int
    offsets: np.ndarray  # CSR adjacency, neighbours sorted ascending
    neighbors: np.ndarray
    rng_seed: int = 0
    kind = "swgraph"

    def adjacency(self, i: int) -> np.ndarray:
        return self.neighbors[self.offsets[i] : self.offsets[i + 1]]

    @property
    def n_edges(self) -> int:
        return len(self.neighbors) // 2

    def search(self, query, k: int = 10, attempts: int | None = None, rng_seed: int = 0) -> QueryResult:
        return knn_search_swgraph(self, query, k, attempts, rng_seed)


def _greedy_pool(adj, data: DataSet, space: Space, query, starts) -> dict[int, float]:
    """Run one greedy walk per start; return every node evaluated on the way."""
    seen: dict[int, float] = {}

    def dist_of(ids: list[int]):
        fresh = [i for i in ids if i not in seen]
        if fresh:
            for i, d in zip(fresh, space.query_distances(data, query, np.array(fresh, dtype=np.int64))):
                seen[i] = float(d)

    for s in starts:
        cur = int(s)
        dist_of([cur])
        while True:
            nbrs = adj(cur)
            if len(nbrs) == 0:
                break
            dist_of(nbrs)
            nxt = min(nbrs, key=lambda i: (seen[i], i))
            if (seen[nxt], nxt) < (seen[cur], cur):
                cur = nxt
            else:
                break
    return seen


def build_swgraph(
    dataset: DataSet,
    space: Space,
    nn: int = 10,
    attempts: int = 2,
    rng_seed: int = 0,
    num_threads: int | None = 1,
) -> ProximityGraph:
    """Insert objects in id order, linking each to the ``nn`` closest nodes its searches found.

    Insertion is sequential; ``num_threads`` is accepted for interface
    compatibility and does not change the result.
    """
    if nn < 1 or attempts < 1:
        raise ValueError("nn and attempts must be >= 1")
    space.validate(dataset)
    rng = make_rng(rng_seed)
    n = len(dataset)
    links: list[list[int]] = [[] for _ in range(n)]
    for i in range(1, n):
        starts = rng.choice(i, size=min(attempts, i), replace=False)
        pool = _greedy_pool(lambda j: links[j], dataset, space, dataset[i], starts)
        ids, _ = top_k(np.fromiter(pool, dtype=np.int64), np.fromiter(pool.values(), dtype=np.float64), nn)
        for j in ids:
            j = int(j)
            links[i].append(j)
            links[j].append(i)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([len(l) for l in links], out=offsets[1:])
    neighbors = np.concatenate([np.sort(np.array(l, dtype=np.int64)) for l in links]) if n else np.zeros(0, np.int64)
    return ProximityGraph(dataset, space, nn, attempts, offsets, neighbors.astype(np.int64), rng_seed)


def query_starts(n: int, attempts: int, rng_seed: int) -> np.ndarray:
    # a prefix of one fixed permutation, so more attempts only add starts
    return make_rng(rng_seed).permutation(n)[: min(attempts, n)]


def knn_search_swgraph(
    graph: ProximityGraph, query, k: int = 10, attempts: int | None = None, rng_seed: int = 0, starts=None
) -> QueryResult:
    check_k(k)
    n = len(graph.dataset)
    if n == 0:
        raise ValueError("graph is empty")
    t0 = time.perf_counter()
    if starts is None:
        starts = query_starts(n, graph.attempts if attempts is None else attempts, rng_seed)
    pool = _greedy_pool(lambda j: graph.adjacency(j).tolist(), graph.dataset, graph.space, query, starts)
    ids = np.fromiter(pool, dtype=np.int64, count=len(pool))
    dists = np.fromiter(pool.values(), dtype=np.float64, count=len(pool))
    rid, rd = top_k(ids, dists, k)
    return QueryResult(rid, rd, len(pool), len(pool), time.perf_counter() - t0, np.sort(ids))
