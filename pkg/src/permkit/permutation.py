"""Pivots, induced permutations, permutation distances and binarization."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import DataSet
from .spaces import Space

WORD_BITS = 64


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide generator: PCG64, seeded explicitly."""
    return np.random.Generator(np.random.PCG64(seed))


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("PERMKIT_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass(frozen=True, eq=False)
class PivotSet:
    objects: DataSet
    ids: np.ndarray | None = None
    rng_seed: int | None = None

    @property
    def m(self) -> int:
        return len(self.objects)


def select_pivots(dataset: DataSet, m: int, rng_seed: int = 0) -> PivotSet:
    """Draw ``m`` distinct objects uniformly without replacement.

    Exact duplicates are skipped while enough distinct objects remain.
    """
    n = len(dataset)
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > n:
        raise ValueError(f"cannot select {m} pivots from {n} objects")
    order = make_rng(rng_seed).permutation(n)
    chosen, dups, seen = [], [], set()
    for i in order:
        key = dataset.object_key(i)
        if key in seen:
            dups.append(i)
            continue
        seen.add(key)
        chosen.append(i)
        if len(chosen) == m:
            break
    if len(chosen) < m:
        chosen.extend(dups[: m - len(chosen)])
    ids = np.array(chosen, dtype=np.int64)
    return PivotSet(dataset.subset(ids), ids, rng_seed)


def external_pivots(objects: DataSet) -> PivotSet:
    if len(objects) < 1:
        raise ValueError("need at least one pivot")
    return PivotSet(objects, None, None)


def ranks_from_distances(dist: np.ndarray) -> np.ndarray:
    """1-based ranks along the last axis; equal distances rank by smaller index first."""
    dist = np.asarray(dist)
    order = np.argsort(dist, axis=-1, kind="stable")
    ranks = np.empty(dist.shape, dtype=np.int32)
    m = dist.shape[-1]
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(1, m + 1, dtype=np.int32), dist.shape), axis=-1)
    return ranks


def pivot_distances(x, pivots: PivotSet, space: Space) -> np.ndarray:
    # object is the left argument in left mode
    if space.query_mode == "left":
        return space.right_batch(x, pivots.objects)
    return space.left_batch(pivots.objects, x)


def compute_permutation(x, pivots: PivotSet, space: Space) -> np.ndarray:
    return ranks_from_distances(pivot_distances(x, pivots, space))


def compute_permutations(
    dataset: DataSet, pivots: PivotSet, space: Space, num_threads: int | None = 1, block: int = 1024
) -> np.ndarray:
    """Permutations of every object, shape ``(N, m)``; independent of ``num_threads``."""
    n, m = len(dataset), pivots.m
    out = np.empty((n, m), dtype=np.int32)
    if n == 0:
        return out

    def work(start: int):
        part = dataset.subset(slice(start, start + block))
        if space.query_mode == "left":
            dist = space.pairwise(part, pivots.objects)
        else:
            dist = space.pairwise(pivots.objects, part).T
        out[start : start + block] = ranks_from_distances(dist)

    starts = range(0, n, block)
    workers = worker_count(num_threads)
    if workers == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(work, starts))
    return out


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    if p.shape != q.shape:
        raise ValueError(f"permutation size mismatch: {p.shape} vs {q.shape}")
    return p, q


def footrule(p, q) -> int:
    p, q = _check_pair(p, q)
    return int(np.abs(p - q).sum())


def spearman_rho(p, q) -> int:
    p, q = _check_pair(p, q)
    d = p - q
    return int((d * d).sum())


def footrule_many(perms: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.abs(perms.astype(np.int64) - q).sum(axis=1)


def spearman_many(perms: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = perms.astype(np.int64) - q
    return (d * d).sum(axis=1)


# --------------------------------------------------------------------------
# binarized permutations


@dataclass(frozen=True, eq=False)
class BitPermutation:
    words: np.ndarray  # uint64, bit i lives in words[i // 64] at position i % 64
    m: int
    b: int

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.m)


def n_words(m: int) -> int:
    return (m + WORD_BITS - 1) // WORD_BITS


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(..., m)`` 0/1 array into ``(..., ceil(m/64))`` uint64 words, tail zeroed."""
    bits = np.asarray(bits, dtype=np.uint8)
    m = bits.shape[-1]
    pad = n_words(m) * WORD_BITS - m
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, m: int) -> np.ndarray:
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, axis=-1, bitorder="little")[..., :m]


def _check_threshold(b: int, m: int):
    if not 1 <= b <= m:
        raise ValueError(f"binarization threshold must be in [1, {m}], got {b}")


def binarize(p, b: int) -> BitPermutation:
    """Bit ``i`` is set iff ``rank[i] >= b``."""
    p = np.asarray(p)
    _check_threshold(b, p.size)
    return BitPermutation(pack_bits(p >= b), p.size, b)


def binarize_many(perms: np.ndarray, b: int) -> np.ndarray:
    _check_threshold(b, perms.shape[1])
    return pack_bits(perms >= b)


def hamming(x: BitPermutation, y: BitPermutation) -> int:
    if x.m != y.m:
        raise ValueError(f"bit permutation length mismatch: {x.m} vs {y.m}")
    return int(np.bitwise_count(x.words ^ y.words).sum())


def hamming_many(words: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words ^ q).sum(axis=1, dtype=np.int64)
