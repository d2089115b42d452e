"""Distance functions and the :class:`Space` abstraction.

Every index in the package evaluates distances through the batch methods of
:class:`Space` (``left_batch`` / ``right_batch`` / ``pairwise``).  The row-wise
kernels are shared between the single-object and batch paths so that a
distance has one value no matter how many rows it was computed with.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numba
import numpy as np

from .dataset import DataKind, DataSet, encode_string

TRIANGLE_SLACK = 1e-9
SQFD_NEGATIVE_FLOOR = -1e-9


class SpaceKind(str, Enum):
    L2 = "l2"
    COSINE = "cosine"
    KL = "kldiv"
    JS = "jsdiv"
    LEVENSHTEIN = "normleven"
    SQFD = "sqfd"


DATA_KIND = {
    SpaceKind.L2: DataKind.DENSE,
    SpaceKind.COSINE: DataKind.SPARSE,
    SpaceKind.KL: DataKind.DENSE,
    SpaceKind.JS: DataKind.DENSE,
    SpaceKind.LEVENSHTEIN: DataKind.STRING,
    SpaceKind.SQFD: DataKind.SIGNATURE,
}

HISTOGRAM_KINDS = (SpaceKind.KL, SpaceKind.JS)


# --------------------------------------------------------------------------
# row kernels (broadcasting; last axis is the vector axis)


def _l2_rows(a, b):
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _kl_rows(x, log_x, log_y):
    return np.sum(x * (log_x - log_y), axis=-1)


def _js_rows(x, xlogx, y, ylogy):
    s = x + y
    val = 0.5 * np.sum(xlogx + ylogy - s * np.log(s * 0.5), axis=-1)
    return np.maximum(val, 0.0)


def _check_same_dim(x: np.ndarray, y: np.ndarray):
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def _check_positive(x: np.ndarray):
    if not np.all(x > 0):
        raise ValueError("histogram components must be strictly positive")


# --------------------------------------------------------------------------
# single-pair distance functions


def l2(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    return float(_l2_rows(x[None, :], y[None, :])[0])


def _sparse_norm(val: np.ndarray) -> float:
    return float(np.sqrt(np.sum(val * val)))


def _sparse_dot(ix, vx, iy, vy) -> float:
    # ordered merge over the two sorted index lists
    i = j = 0
    nx, ny = len(ix), len(iy)
    acc = 0.0
    while i < nx and j < ny:
        a, b = ix[i], iy[j]
        if a == b:
            acc += vx[i] * vy[j]
            i += 1
            j += 1
        elif a < b:
            i += 1
        else:
            j += 1
    return acc


_sparse_dot_jit = numba.njit(cache=True)(_sparse_dot)


def cosine_distance(x, y) -> float:
    """``1 - <x, y> / (|x| |y|)`` for sparse ``(indices, values)`` vectors."""
    ix, vx = np.asarray(x[0], dtype=np.int64), np.asarray(x[1], dtype=np.float64)
    iy, vy = np.asarray(y[0], dtype=np.int64), np.asarray(y[1], dtype=np.float64)
    nx, ny = _sparse_norm(vx), _sparse_norm(vy)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine distance is undefined for a zero-norm vector")
    dot = _sparse_dot_jit(ix, vx, iy, vy)
    return float(min(max(1.0 - dot / (nx * ny), 0.0), 2.0))


def kl_divergence(x, y, precomputed_log_x=None) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    _check_positive(x)
    _check_positive(y)
    log_x = np.log(x) if precomputed_log_x is None else np.asarray(precomputed_log_x)
    return float(_kl_rows(x[None, :], log_x[None, :], np.log(y)[None, :])[0])


def js_divergence(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    _check_positive(x)
    _check_positive(y)
    return float(_js_rows(x[None, :], (x * np.log(x))[None, :], y[None, :], (y * np.log(y))[None, :])[0])


@numba.njit(cache=True)
def _levenshtein(a, b):
    n, m = a.size, b.size
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            cur[j] = v
        prev, cur = cur, prev
    return prev[m]


@numba.njit(cache=True)
def _norm_lev(a, b):
    longest = max(a.size, b.size)
    if longest == 0:
        return 0.0
    return _levenshtein(a, b) / longest


@numba.njit(cache=True)
def _norm_lev_batch(buf, offsets, ids, q, data_left):
    out = np.empty(ids.size)
    for k in range(ids.size):
        i = ids[k]
        row = buf[offsets[i] : offsets[i + 1]]
        if data_left:
            out[k] = _norm_lev(row, q)
        else:
            out[k] = _norm_lev(q, row)
    return out


@numba.njit(cache=True)
def _norm_lev_paired(buf_a, off_a, ia, buf_b, off_b, ib):
    out = np.empty(ia.size)
    for k in range(ia.size):
        a = buf_a[off_a[ia[k]] : off_a[ia[k] + 1]]
        b = buf_b[off_b[ib[k]] : off_b[ib[k] + 1]]
        out[k] = _norm_lev(a, b)
    return out


def levenshtein(x: str, y: str) -> int:
    return int(_levenshtein(encode_string(x), encode_string(y)))


def normalized_levenshtein(x: str, y: str) -> float:
    """Unit-cost edit distance divided by the longer length (0 for two empty strings)."""
    return float(_norm_lev(encode_string(x), encode_string(y)))


def heuristic_similarity(a: np.ndarray, b: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """``1 / (alpha + L2)`` between every row of ``a`` and every row of ``b``."""
    return 1.0 / (alpha + _l2_rows(a[:, None, :], b[None, :, :]))


def _signature_key(sig) -> bytes:
    return sig[0].tobytes() + sig[1].tobytes()


def sqfd(x, y, alpha: float = 1.0) -> float:
    """Signature quadratic form distance ``sqrt(w^T A w)``.

    ``w`` concatenates the weights of ``x`` with the negated weights of ``y`` and
    ``A`` is the heuristic similarity between all cluster representatives.  The
    pair is put in a canonical order first, which makes the value exactly
    symmetric; the block expansion makes ``sqfd(x, x)`` exactly zero.
    """
    cx, wx = np.asarray(x[0], dtype=np.float64), np.asarray(x[1], dtype=np.float64)
    cy, wy = np.asarray(y[0], dtype=np.float64), np.asarray(y[1], dtype=np.float64)
    if _signature_key((cx, wx)) > _signature_key((cy, wy)):
        cx, wx, cy, wy = cy, wy, cx, wx
    qxx = wx @ (heuristic_similarity(cx, cx, alpha) @ wx)
    qyy = wy @ (heuristic_similarity(cy, cy, alpha) @ wy)
    qxy = wx @ (heuristic_similarity(cx, cy, alpha) @ wy)
    val = (qxx + qyy) - 2.0 * qxy
    if val < 0.0:
        if val < SQFD_NEGATIVE_FLOOR:
            raise ValueError(f"quadratic form is negative ({val}); similarity is not positive definite")
        val = 0.0
    return float(np.sqrt(val))


# --------------------------------------------------------------------------
# Space


def _select(arr: np.ndarray, ids):
    return arr if ids is None else arr[ids]


def _id_array(data: DataSet, ids) -> np.ndarray:
    if ids is None:
        return np.arange(len(data), dtype=np.int64)
    if isinstance(ids, slice):
        return np.arange(len(data), dtype=np.int64)[ids]
    return np.asarray(ids, dtype=np.int64).reshape(-1)


@dataclass(frozen=True)
class Space:
    """A distance function over one object representation.

    ``query_mode`` decides argument order for asymmetric distances: in ``left``
    mode a data point is the first argument, ``d(x, q)``.
    """

    kind: SpaceKind
    query_mode: str = "left"
    sqfd_alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpaceKind(self.kind))
        if self.query_mode not in ("left", "right"):
            raise ValueError("query_mode must be 'left' or 'right'")

    @property
    def symmetric(self) -> bool:
        return self.kind is not SpaceKind.KL

    @property
    def data_kind(self) -> DataKind:
        return DATA_KIND[self.kind]

    @property
    def is_histogram(self) -> bool:
        return self.kind in HISTOGRAM_KINDS

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "query_mode": self.query_mode, "sqfd_alpha": self.sqfd_alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "Space":
        return cls(SpaceKind(d["kind"]), d.get("query_mode", "left"), float(d.get("sqfd_alpha", 1.0)))

    def validate(self, data: DataSet):
        if data.kind is not self.data_kind:
            raise ValueError(f"{self.kind.value} needs {self.data_kind.value} data, got {data.kind.value}")
        if self.is_histogram and len(data) and not np.all(data.objects > 0):
            raise ValueError("histogram components must be strictly positive")
        if self.is_histogram and len(data) and np.max(np.abs(data.objects.sum(axis=1) - 1.0)) > 1e-6:
            raise ValueError("histograms must sum to 1 within 1e-6")

    # single pair ------------------------------------------------------------

    def distance(self, x, y) -> float:
        """``d(x, y)`` with ``x`` as the left argument."""
        k = self.kind
        if k is SpaceKind.L2:
            return l2(x, y)
        if k is SpaceKind.COSINE:
            return cosine_distance(x, y)
        if k is SpaceKind.KL:
            return kl_divergence(x, y)
        if k is SpaceKind.JS:
            return js_divergence(x, y)
        if k is SpaceKind.LEVENSHTEIN:
            return normalized_levenshtein(x, y)
        return sqfd(x, y, self.sqfd_alpha)

    def query_distance(self, obj, q) -> float:
        return self.distance(obj, q) if self.query_mode == "left" else self.distance(q, obj)

    # batches ------------------------------------------------------------------

    def left_batch(self, data: DataSet, y, ids=None) -> np.ndarray:
        """``d(data[i], y)`` for the selected rows."""
        k = self.kind
        if k is SpaceKind.L2:
            y = np.asarray(y, dtype=np.float64)
            return _l2_rows(_select(data.objects, ids), y[None, :])
        if k is SpaceKind.KL:
            y = np.asarray(y, dtype=np.float64)
            _check_positive(y)
            return _kl_rows(_select(data.objects, ids), _select(data.log_values, ids), np.log(y)[None, :])
        if k is SpaceKind.JS:
            return self._js_batch(data, y, ids)
        if k is SpaceKind.COSINE:
            return self._cosine_batch(data, y, ids)
        if k is SpaceKind.LEVENSHTEIN:
            buf, offsets = data.encoded
            return _norm_lev_batch(buf, offsets, _id_array(data, ids), encode_string(y), True)
        return np.array([sqfd(data.objects[i], y, self.sqfd_alpha) for i in _id_array(data, ids)], dtype=np.float64)

    def right_batch(self, x, data: DataSet, ids=None) -> np.ndarray:
        """``d(x, data[i])`` for the selected rows."""
        k = self.kind
        if k is SpaceKind.KL:
            x = np.asarray(x, dtype=np.float64)
            _check_positive(x)
            return _kl_rows(x[None, :], np.log(x)[None, :], _select(data.log_values, ids))
        if k is SpaceKind.LEVENSHTEIN:
            buf, offsets = data.encoded
            return _norm_lev_batch(buf, offsets, _id_array(data, ids), encode_string(x), False)
        return self.left_batch(data, x, ids)

    def query_distances(self, data: DataSet, q, ids=None) -> np.ndarray:
        """Distances between stored objects and a query under the query mode."""
        if self.query_mode == "left":
            return self.left_batch(data, q, ids)
        return self.right_batch(q, data, ids)

    def reverse_query_distances(self, obj, data: DataSet, ids=None) -> np.ndarray:
        """Like :meth:`query_distances` with ``obj`` stored and ``data`` rows acting as queries."""
        if self.query_mode == "left":
            return self.right_batch(obj, data, ids)
        return self.left_batch(data, obj, ids)

    def pairwise(self, a: DataSet, b: DataSet, block_elems: int = 1 << 22) -> np.ndarray:
        """Matrix ``d(a[i], b[j])``; row ``i`` equals ``right_batch(a[i], b)`` exactly."""
        na, nb = len(a), len(b)
        out = np.empty((na, nb), dtype=np.float64)
        if na == 0 or nb == 0:
            return out
        if self.kind in (SpaceKind.L2, SpaceKind.KL, SpaceKind.JS):
            dim = max(a.objects.shape[1], 1)
            step = max(1, block_elems // (nb * dim))
            B = b.objects[None, :, :]
            for s in range(0, na, step):
                A = a.objects[s : s + step, None, :]
                if self.kind is SpaceKind.L2:
                    out[s : s + step] = _l2_rows(A, B)
                elif self.kind is SpaceKind.KL:
                    out[s : s + step] = _kl_rows(A, a.log_values[s : s + step, None, :], b.log_values[None, :, :])
                else:
                    out[s : s + step] = _js_rows(A, a.xlogx[s : s + step, None, :], B, b.xlogx[None, :, :])
            return out
        for i in range(na):
            out[i] = self.right_batch(a.objects[i], b)
        return out

    def paired(self, a: DataSet, ia, b: DataSet, ib) -> np.ndarray:
        """Element-wise ``d(a[ia[k]], b[ib[k]])``."""
        ia = np.asarray(ia, dtype=np.int64)
        ib = np.asarray(ib, dtype=np.int64)
        k = self.kind
        if k is SpaceKind.L2:
            return _l2_rows(a.objects[ia], b.objects[ib])
        if k is SpaceKind.KL:
            return _kl_rows(a.objects[ia], a.log_values[ia], b.log_values[ib])
        if k is SpaceKind.JS:
            return _js_rows(a.objects[ia], a.xlogx[ia], b.objects[ib], b.xlogx[ib])
        if k is SpaceKind.LEVENSHTEIN:
            ba, oa = a.encoded
            bb, ob = b.encoded
            return _norm_lev_paired(ba, oa, ia, bb, ob, ib)
        return np.array([self.distance(a.objects[i], b.objects[j]) for i, j in zip(ia, ib)], dtype=np.float64)

    # internals -----------------------------------------------------------------

    def _js_batch(self, data: DataSet, y, ids):
        y = np.asarray(y, dtype=np.float64)
        _check_positive(y)
        return _js_rows(_select(data.objects, ids), _select(data.xlogx, ids), y[None, :], (y * np.log(y))[None, :])

    def _cosine_batch(self, data: DataSet, y, ids):
        iy = np.asarray(y[0], dtype=np.int64)
        vy = np.asarray(y[1], dtype=np.float64)
        ny = _sparse_norm(vy)
        if ny == 0.0:
            raise ValueError("cosine distance is undefined for a zero-norm vector")
        csr = data.csr
        ncols = csr.shape[1]
        keep = iy < ncols
        dense_q = np.zeros(ncols)
        dense_q[iy[keep]] = vy[keep]
        rows = csr if ids is None else csr[ids]
        dots = rows @ dense_q
        norms = _select(data.sparse_norms, ids)
        if np.any(norms == 0.0):
            raise ValueError("cosine distance is undefined for a zero-norm vector")
        return np.clip(1.0 - dots / (norms * ny), 0.0, 2.0)


# --------------------------------------------------------------------------
# diagnostics

TRANSFORMS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"id": lambda v: v, "sqrt": np.sqrt}


def _sample_triples(n: int, num_triples: int, rng_seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    return rng.integers(0, n, size=(num_triples, 3))


def triangle_violation_rate(dataset: DataSet, space: Space, num_triples: int, rng_seed: int = 0) -> float:
    """Fraction of random ordered triples with ``d(a,c) > d(a,b) + d(b,c) + 1e-9``."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if num_triples <= 0:
        return 0.0
    t = _sample_triples(len(dataset), num_triples, rng_seed)
    d_ab = space.paired(dataset, t[:, 0], dataset, t[:, 1])
    d_bc = space.paired(dataset, t[:, 1], dataset, t[:, 2])
    d_ac = space.paired(dataset, t[:, 0], dataset, t[:, 2])
    return float(np.mean(d_ac > d_ab + d_bc + TRIANGLE_SLACK))


def mu_defectiveness_probe(
    dataset: DataSet, space: Space, transform: str = "id", num_triples: int = 10_000, rng_seed: int = 0
) -> float:
    """Smallest ``mu`` with ``|f(d(q,a)) - f(d(q,b))| <= mu f(d(a,b))`` over sampled triples."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    f = TRANSFORMS[transform]
    if num_triples <= 0:
        return 0.0
    t = _sample_triples(len(dataset), num_triples, rng_seed)
    q, a, b = t[:, 0], t[:, 1], t[:, 2]
    lhs = np.abs(f(space.paired(dataset, q, dataset, a)) - f(space.paired(dataset, q, dataset, b)))
    rhs = f(space.paired(dataset, a, dataset, b))
    ok = rhs >= 1e-12
    if not np.any(ok):
        return 0.0
    return float(np.max(lhs[ok] / rhs[ok]))
