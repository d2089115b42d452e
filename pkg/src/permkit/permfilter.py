"""Brute-force filtering of permutations followed by refinement."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import DataSet
from .permutation import (
    PivotSet,
    binarize_many,
    compute_permutation,
    compute_permutations,
    footrule_many,
    hamming_many,
    pack_bits,
    select_pivots,
    spearman_many,
)
from .results import QueryResult, check_k, refine, resolve_gamma, smallest_by_key
from .spaces import Space

PERM_DISTANCES = ("spearman", "footrule", "hamming")


@dataclass(eq=False)
class PermFilterIndex:
    dataset: DataSet
    space: Space
    pivots: PivotSet
    mode: str  # "full" or "binary"
    perms: np.ndarray | None = None  # (N, m) int32 ranks, full mode
    bits: np.ndarray | None = None  # (N, words) uint64, binary mode
    b: int | None = None
    rng_seed: int = 0
    kind = "permfilter"

    @property
    def m(self) -> int:
        return self.pivots.m

    def search(self, query, k: int = 10, gamma=0.01, perm_distance: str | None = None) -> QueryResult:
        return knn_search_permfilter(self, query, k, gamma, perm_distance)


def build_permfilter(
    dataset: DataSet,
    space: Space,
    m: int = 128,
    mode: str = "full",
    b: int | None = None,
    rng_seed: int = 0,
    pivots: PivotSet | None = None,
    num_threads: int | None = 1,
) -> PermFilterIndex:
    """Store one (possibly binarized) permutation per object; ``N * m`` distance evaluations."""
    if mode not in ("full", "binary"):
        raise ValueError(f"unknown mode {mode!r}")
    space.validate(dataset)
    if pivots is None:
        pivots = select_pivots(dataset, m, rng_seed)
    perms = compute_permutations(dataset, pivots, space, num_threads)
    if mode == "full":
        return PermFilterIndex(dataset, space, pivots, mode, perms=perms, rng_seed=rng_seed)
    if b is None:
        b = max(1, pivots.m // 2)
    return PermFilterIndex(dataset, space, pivots, mode, bits=binarize_many(perms, b), b=b, rng_seed=rng_seed)


def permutation_distances(index: PermFilterIndex, qperm: np.ndarray, perm_distance: str) -> np.ndarray:
    if perm_distance == "hamming":
        b = index.b or max(1, index.m // 2)
        bits = index.bits if index.bits is not None else binarize_many(index.perms, b)
        return hamming_many(bits, pack_bits(qperm >= b))
    if index.mode != "full":
        raise ValueError(f"{perm_distance} needs full permutations; index is binarized")
    if perm_distance == "spearman":
        return spearman_many(index.perms, qperm)
    if perm_distance == "footrule":
        return footrule_many(index.perms, qperm)
    raise ValueError(f"unknown permutation distance {perm_distance!r}")


def knn_search_permfilter(
    index: PermFilterIndex, query, k: int = 10, gamma=0.01, perm_distance: str | None = None
) -> QueryResult:
    """Scan all stored permutations, keep the ``gamma`` closest, refine with the real distance."""
    check_k(k)
    t0 = time.perf_counter()
    n = len(index.dataset)
    count = resolve_gamma(gamma, n, k)
    if perm_distance is None:
        perm_distance = "spearman" if index.mode == "full" else "hamming"
    qperm = compute_permutation(query, index.pivots, index.space)
    pd = permutation_distances(index, qperm, perm_distance)
    cand = smallest_by_key(pd, count)
    ids, dists = refine(index.dataset, index.space, query, cand, k)
    return QueryResult(ids, dists, index.m + cand.size, cand.size, time.perf_counter() - t0, cand)
