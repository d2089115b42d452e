"""In-memory object collections with stable integer ids.

A :class:`DataSet` holds objects of one representation:

* ``dense``     -- ``(N, d)`` float64 array, one row per object
* ``sparse``    -- list of ``(indices, values)`` pairs, indices strictly increasing
* ``string``    -- list of ``str``
* ``signature`` -- list of ``(centroids, weights)``; centroids are ``(c, 7)``

Object ``i`` has id ``i``.  Derived caches (logarithms, CSR matrices, encoded
strings) are computed lazily once and are read-only afterwards.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

SIGNATURE_DIM = 7


class DataKind(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    STRING = "string"
    SIGNATURE = "signature"


@dataclass(frozen=True, eq=False)
class DataSet:
    kind: DataKind
    objects: Any

    def __post_init__(self):
        if self.kind is DataKind.DENSE:
            arr = np.asarray(self.objects, dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError("dense data must be a 2-D array")
            object.__setattr__(self, "objects", arr)
        else:
            object.__setattr__(self, "objects", list(self.objects))

    # construction helpers -------------------------------------------------

    @classmethod
    def dense(cls, values) -> "DataSet":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(0, 0) if arr.size == 0 else arr[None, :]
        return cls(DataKind.DENSE, arr)

    @classmethod
    def sparse(cls, records: Sequence) -> "DataSet":
        out = []
        for rec in records:
            if isinstance(rec, dict):
                idx = np.fromiter(sorted(rec), dtype=np.int64, count=len(rec))
                val = np.array([rec[i] for i in idx], dtype=np.float64)
            else:
                idx = np.asarray(rec[0], dtype=np.int64)
                val = np.asarray(rec[1], dtype=np.float64)
            if idx.size > 1 and np.any(np.diff(idx) <= 0):
                raise ValueError("sparse indices must be strictly increasing")
            out.append((idx, val))
        return cls(DataKind.SPARSE, out)

    @classmethod
    def strings(cls, records: Sequence[str]) -> "DataSet":
        return cls(DataKind.STRING, [str(s) for s in records])

    @classmethod
    def signatures(cls, records: Sequence) -> "DataSet":
        out = []
        for cent, w in records:
            cent = np.asarray(cent, dtype=np.float64).reshape(-1, SIGNATURE_DIM)
            w = np.asarray(w, dtype=np.float64).reshape(-1)
            if cent.shape[0] != w.shape[0] or w.size == 0:
                raise ValueError("signature needs one weight per cluster and at least one cluster")
            out.append((cent, w))
        return cls(DataKind.SIGNATURE, out)

    @classmethod
    def of(cls, kind: DataKind, objs: Sequence) -> "DataSet":
        """Build a data set of ``kind`` from a list of single objects."""
        if kind is DataKind.DENSE:
            objs = list(objs)
            if not objs:
                return cls(kind, np.zeros((0, 0)))
            return cls(kind, np.vstack([np.asarray(o, dtype=np.float64) for o in objs]))
        if kind is DataKind.SPARSE:
            return cls.sparse(objs)
        if kind is DataKind.STRING:
            return cls.strings(objs)
        return cls.signatures(objs)

    # container protocol ---------------------------------------------------

    def __len__(self) -> int:
        if self.kind is DataKind.DENSE:
            return self.objects.shape[0]
        return len(self.objects)

    def __getitem__(self, i: int):
        return self.objects[int(i)]

    @property
    def dim(self) -> int | None:
        if self.kind is DataKind.DENSE:
            return self.objects.shape[1]
        return None

    def subset(self, ids) -> "DataSet":
        """New data set holding objects ``ids`` in that order (ids renumbered from 0)."""
        if self.kind is DataKind.DENSE:
            return DataSet(self.kind, np.ascontiguousarray(self.objects[ids]))
        if isinstance(ids, slice):
            return DataSet(self.kind, self.objects[ids])
        return DataSet(self.kind, [self.objects[int(i)] for i in np.asarray(ids).reshape(-1)])

    # lazily derived, read-only caches ---------------------------------------

    @cached_property
    def log_values(self) -> np.ndarray:
        """Natural logarithms of dense values, computed once (KL/JS spaces)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.objects)

    @cached_property
    def xlogx(self) -> np.ndarray:
        return self.objects * self.log_values

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = len(self)
        lengths = np.array([len(idx) for idx, _ in self.objects], dtype=np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if n:
            indices = np.concatenate([idx for idx, _ in self.objects]).astype(np.int64)
            data = np.concatenate([val for _, val in self.objects])
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        ncols = int(indices.max()) + 1 if indices.size else 1
        return sp.csr_matrix((data, indices, indptr), shape=(n, ncols))

    @cached_property
    def sparse_norms(self) -> np.ndarray:
        return np.array([np.sqrt(np.sum(val * val)) for _, val in self.objects])

    @cached_property
    def encoded(self) -> tuple[np.ndarray, np.ndarray]:
        """Strings as one uint32 code-point buffer plus offsets (for the compiled kernels)."""
        codes = [encode_string(s) for s in self.objects]
        offsets = np.zeros(len(codes) + 1, dtype=np.int64)
        np.cumsum([c.size for c in codes], out=offsets[1:])
        buf = np.concatenate(codes) if codes else np.zeros(0, dtype=np.uint32)
        return buf.astype(np.uint32), offsets

    # identity -------------------------------------------------------------

    def pack(self) -> dict[str, np.ndarray]:
        """Flat array form, used for hashing and snapshot storage."""
        if self.kind is DataKind.DENSE:
            return {"values": np.ascontiguousarray(self.objects, dtype="<f8")}
        if self.kind is DataKind.SPARSE:
            csr = self.csr
            return {
                "indptr": csr.indptr.astype("<i8"),
                "indices": csr.indices.astype("<i8"),
                "values": csr.data.astype("<f8"),
            }
        if self.kind is DataKind.STRING:
            buf, offsets = self.encoded
            return {"codes": buf.astype("<u4"), "offsets": offsets.astype("<i8")}
        counts = np.array([w.size for _, w in self.objects], dtype="<i8")
        cents = (
            np.vstack([c for c, _ in self.objects]) if self.objects else np.zeros((0, SIGNATURE_DIM))
        )
        weights = np.concatenate([w for _, w in self.objects]) if self.objects else np.zeros(0)
        return {"counts": counts, "centroids": cents.astype("<f8"), "weights": weights.astype("<f8")}

    @classmethod
    def unpack(cls, kind: DataKind, arrays: dict[str, np.ndarray]) -> "DataSet":
        kind = DataKind(kind)
        if kind is DataKind.DENSE:
            return cls(kind, np.array(arrays["values"], dtype=np.float64))
        if kind is DataKind.SPARSE:
            indptr, indices, values = arrays["indptr"], arrays["indices"], arrays["values"]
            recs = [
                (np.array(indices[indptr[i] : indptr[i + 1]], dtype=np.int64),
                 np.array(values[indptr[i] : indptr[i + 1]], dtype=np.float64))
                for i in range(len(indptr) - 1)
            ]
            return cls(kind, recs)
        if kind is DataKind.STRING:
            codes, offsets = arrays["codes"], arrays["offsets"]
            return cls(kind, [decode_string(codes[offsets[i] : offsets[i + 1]]) for i in range(len(offsets) - 1)])
        counts, cents, weights = arrays["counts"], arrays["centroids"], arrays["weights"]
        bounds = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        recs = [
            (np.array(cents[bounds[i] : bounds[i + 1]]), np.array(weights[bounds[i] : bounds[i + 1]]))
            for i in range(len(counts))
        ]
        return cls(kind, recs)

    def content_hash(self) -> str:
        h = hashlib.sha256(self.kind.value.encode())
        for name, arr in sorted(self.pack().items()):
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def object_key(self, i: int) -> bytes:
        """Byte representation of object ``i``; equal keys mean identical objects."""
        obj = self.objects[int(i)]
        if self.kind is DataKind.DENSE:
            return obj.tobytes()
        if self.kind is DataKind.STRING:
            return obj.encode("utf-8", "surrogatepass")
        a, b = obj
        return a.tobytes() + b"|" + b.tobytes()


def encode_string(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype="<u4").astype(np.uint32)


def decode_string(codes: np.ndarray) -> str:
    return np.asarray(codes, dtype="<u4").tobytes().decode("utf-32-le")
