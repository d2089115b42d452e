"""Dataset files and synthetic generators.

Formats
-------
dense-text      one vector per line, whitespace-separated numbers
dense-binary    little-endian header ``magic, version, count, dim`` then
                row-major float32 values
sparse-text     one vector per line, ``index:value`` pairs, indices ascending
string-lines    one sequence per line
signature-text  ``c`` then ``c`` groups of 8 numbers (7 centroid + weight)
fvecs           TEXMEX layout (int32 dim, then dim float32) per vector; read only
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dataset import SIGNATURE_DIM, DataKind, DataSet
from .permutation import make_rng
from .spaces import DATA_KIND, SpaceKind

DENSE_MAGIC = b"PKDV"
DENSE_VERSION = 1
_DENSE_HEADER = struct.Struct("<4sIQI")

FORMATS = ("dense-text", "dense-binary", "sparse-text", "string-lines", "signature-text", "fvecs")
FORMAT_KIND = {
    "dense-text": DataKind.DENSE,
    "dense-binary": DataKind.DENSE,
    "fvecs": DataKind.DENSE,
    "sparse-text": DataKind.SPARSE,
    "string-lines": DataKind.STRING,
    "signature-text": DataKind.SIGNATURE,
}
DEFAULT_FORMAT = {
    DataKind.DENSE: "dense-text",
    DataKind.SPARSE: "sparse-text",
    DataKind.STRING: "string-lines",
    DataKind.SIGNATURE: "signature-text",
}


class DataFormatError(ValueError):
    """A dataset file could not be parsed or failed validation."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _floats(tokens, path, lineno) -> np.ndarray:
    try:
        vals = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"cannot parse number ({exc})", path, lineno) from None
    if not np.all(np.isfinite(vals)):
        raise DataFormatError("non-finite value", path, lineno)
    return vals


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            yield lineno, line


def _read_dense_text(path) -> DataSet:
    rows, dim = [], None
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        vals = _floats(line.split(), path, lineno)
        if dim is None:
            dim = vals.size
        elif vals.size != dim:
            raise DataFormatError(f"dimension mismatch: expected {dim}, got {vals.size}", path, lineno)
        rows.append(vals)
    return DataSet.dense(np.vstack(rows)) if rows else DataSet(DataKind.DENSE, np.zeros((0, 0)))


def read_dense_binary(path) -> DataSet:
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        return DataSet(DataKind.DENSE, np.zeros((0, 0)))
    if len(raw) < _DENSE_HEADER.size:
        raise DataFormatError("truncated header", path)
    magic, version, count, dim = _DENSE_HEADER.unpack_from(raw)
    if magic != DENSE_MAGIC:
        raise DataFormatError("bad magic; not a dense-binary file", path)
    if version != DENSE_VERSION:
        raise DataFormatError(f"unsupported dense-binary version {version}", path)
    need = _DENSE_HEADER.size + 4 * count * dim
    if len(raw) != need:
        raise DataFormatError(f"expected {need} bytes, found {len(raw)}", path)
    vals = np.frombuffer(raw, dtype="<f4", offset=_DENSE_HEADER.size).reshape(count, dim)
    if not np.all(np.isfinite(vals)):
        raise DataFormatError("non-finite value", path)
    return DataSet.dense(vals.astype(np.float64))


def write_dense_binary(data: DataSet, path):
    vals = np.ascontiguousarray(data.objects, dtype="<f4")
    count, dim = vals.shape
    with open(path, "wb") as fh:
        fh.write(_DENSE_HEADER.pack(DENSE_MAGIC, DENSE_VERSION, count, dim))
        fh.write(vals.tobytes())


def read_fvecs(path, limit: int | None = None) -> DataSet:
    raw = np.fromfile(path, dtype="<i4")
    if raw.size == 0:
        return DataSet(DataKind.DENSE, np.zeros((0, 0)))
    dim = int(raw[0])
    if dim <= 0 or raw.size % (dim + 1):
        raise DataFormatError("not an fvecs file", path)
    rows = raw.reshape(-1, dim + 1)
    if np.any(rows[:, 0] != dim):
        raise DataFormatError("inconsistent fvecs dimensions", path)
    vals = rows[:, 1:].copy().view("<f4")
    if limit is not None:
        vals = vals[:limit]
    if not np.all(np.isfinite(vals)):
        raise DataFormatError("non-finite value", path)
    return DataSet.dense(vals.astype(np.float64))


def _read_sparse_text(path) -> DataSet:
    recs = []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        idx, val = [], []
        for tok in line.split():
            try:
                i, v = tok.split(":")
                idx.append(int(i))
                val.append(float(v))
            except ValueError:
                raise DataFormatError(f"bad sparse entry {tok!r}", path, lineno) from None
        idx_a, val_a = np.array(idx, dtype=np.int64), np.array(val, dtype=np.float64)
        if idx_a.size and (idx_a[0] < 0 or np.any(np.diff(idx_a) <= 0)):
            raise DataFormatError("indices must be non-negative and strictly increasing", path, lineno)
        if not np.all(np.isfinite(val_a)):
            raise DataFormatError("non-finite value", path, lineno)
        keep = val_a != 0.0
        recs.append((idx_a[keep], val_a[keep]))
    return DataSet.sparse(recs)


def _read_strings(path) -> DataSet:
    return DataSet.strings([line for _, line in _lines(path)])


def _read_signatures(path) -> DataSet:
    recs = []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        toks = line.split()
        try:
            c = int(toks[0])
        except ValueError:
            raise DataFormatError("first field must be the cluster count", path, lineno) from None
        vals = _floats(toks[1:], path, lineno)
        if c < 1 or vals.size != c * (SIGNATURE_DIM + 1):
            raise DataFormatError(f"expected {c} clusters of {SIGNATURE_DIM + 1} numbers", path, lineno)
        groups = vals.reshape(c, SIGNATURE_DIM + 1)
        w = groups[:, SIGNATURE_DIM]
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-4:
            raise DataFormatError("cluster weights must be positive and sum to 1", path, lineno)
        recs.append((groups[:, :SIGNATURE_DIM], w))
    return DataSet.signatures(recs)


def floor_histograms(values: np.ndarray, epsilon: float = 1e-5, normalize: bool = True) -> np.ndarray:
    """Replace components below ``epsilon`` by ``epsilon``, then rescale rows to sum 1."""
    out = np.where(values < epsilon, epsilon, values)
    if normalize and out.size:
        out = out / out.sum(axis=1, keepdims=True)
    return out


def load_dataset(path, fmt: str | None = None, space_kind: SpaceKind | str | None = None,
                 floor_epsilon: float = 1e-5, normalize: bool = True, limit: int | None = None) -> DataSet:
    """Read a dataset file; ids follow record order starting at 0.

    For histogram spaces (KL/JS) values are floored at ``floor_epsilon`` and
    rows renormalized.
    """
    kind = SpaceKind(space_kind) if space_kind is not None else None
    if fmt is None:
        fmt = DEFAULT_FORMAT[DATA_KIND[kind]] if kind is not None else "dense-text"
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if not Path(path).exists():
        raise DataFormatError("file not found", path)
    if kind is not None and DATA_KIND[kind] is not FORMAT_KIND[fmt]:
        raise ValueError(f"format {fmt} does not hold data for {kind.value}")
    if fmt == "dense-text":
        data = _read_dense_text(path)
    elif fmt == "dense-binary":
        data = read_dense_binary(path)
    elif fmt == "fvecs":
        data = read_fvecs(path)
    elif fmt == "sparse-text":
        data = _read_sparse_text(path)
    elif fmt == "string-lines":
        data = _read_strings(path)
    else:
        data = _read_signatures(path)
    if limit is not None:
        data = data.subset(slice(0, limit))
    if kind in (SpaceKind.KL, SpaceKind.JS) and len(data):
        if np.any(data.objects < 0):
            raise DataFormatError("histogram values must be non-negative", path)
        data = DataSet.dense(floor_histograms(data.objects, floor_epsilon, normalize))
    return data


def save_dataset(data: DataSet, path, fmt: str | None = None):
    fmt = fmt or DEFAULT_FORMAT[data.kind]
    if FORMAT_KIND.get(fmt) is not data.kind or fmt == "fvecs":
        raise ValueError(f"cannot write {data.kind.value} data as {fmt}")
    if fmt == "dense-binary":
        write_dense_binary(data, path)
        return
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "dense-text":
            for row in data.objects:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        elif fmt == "sparse-text":
            for idx, val in data.objects:
                fh.write(" ".join(f"{int(i)}:{float(v)!r}" for i, v in zip(idx, val)) + "\n")
        elif fmt == "string-lines":
            for s in data.objects:
                fh.write(s + "\n")
        else:
            for cent, w in data.objects:
                groups = np.hstack([cent, w[:, None]]).reshape(-1)
                fh.write(f"{len(w)} " + " ".join(repr(float(v)) for v in groups) + "\n")


# --------------------------------------------------------------------------
# synthetic data

GENERATORS = ("gaussian-mixture", "uniform", "dirichlet", "dna", "sparse", "signatures")


def generate_synthetic(kind: str, n: int, rng_seed: int = 0, **params) -> DataSet:
    """Deterministic synthetic data (PCG64 generator).

    ``gaussian-mixture``: dim, clusters, spread;  ``uniform``: dim;
    ``dirichlet``: dim, alpha, epsilon;  ``dna``: mean_length, sd_length;
    ``sparse``: dim, nnz;  ``signatures``: clusters.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = make_rng(rng_seed)
    if kind == "uniform":
        dim = int(params.get("dim", 16))
        return DataSet.dense(rng.random((n, dim)))
    if kind == "gaussian-mixture":
        dim = int(params.get("dim", 16))
        clusters = int(params.get("clusters", 10))
        spread = float(params.get("spread", 0.1))
        if clusters < 1 or dim < 1:
            raise ValueError("clusters and dim must be >= 1")
        centers = rng.random((clusters, dim))
        labels = rng.integers(0, clusters, size=n)
        return DataSet.dense(centers[labels] + spread * rng.standard_normal((n, dim)))
    if kind == "dirichlet":
        dim = int(params.get("dim", 8))
        alpha = float(params.get("alpha", 1.0))
        if dim < 2 or alpha <= 0:
            raise ValueError("dirichlet needs dim >= 2 and alpha > 0")
        raw = rng.dirichlet(np.full(dim, alpha), size=n) if n else np.zeros((0, dim))
        return DataSet.dense(floor_histograms(raw, float(params.get("epsilon", 1e-5))))
    if kind == "dna":
        mean = float(params.get("mean_length", 32.0))
        sd = float(params.get("sd_length", 4.0))
        lengths = np.maximum(1, np.rint(rng.normal(mean, sd, size=n)).astype(np.int64))
        alphabet = np.array(list("ACGT"))
        return DataSet.strings(["".join(alphabet[rng.integers(0, 4, size=L)]) for L in lengths])
    if kind == "sparse":
        dim = int(params.get("dim", 1000))
        nnz = int(params.get("nnz", 20))
        if not 1 <= nnz <= dim:
            raise ValueError("need 1 <= nnz <= dim")
        recs = []
        for _ in range(n):
            idx = np.sort(rng.choice(dim, size=nnz, replace=False)).astype(np.int64)
            recs.append((idx, rng.random(nnz) + 0.01))
        return DataSet.sparse(recs)
    if kind == "signatures":
        clusters = int(params.get("clusters", 8))
        if clusters < 1:
            raise ValueError("clusters must be >= 1")
        recs = []
        for _ in range(n):
            c = int(rng.integers(1, clusters + 1))
            w = rng.random(c) + 0.05
            recs.append((rng.random((c, SIGNATURE_DIM)), w / w.sum()))
        return DataSet.signatures(recs)
    raise ValueError(f"unknown generator {kind!r}; choose from {GENERATORS}")


def default_generator(space_kind: SpaceKind | str) -> str:
    return {
        SpaceKind.L2: "gaussian-mixture",
        SpaceKind.COSINE: "sparse",
        SpaceKind.KL: "dirichlet",
        SpaceKind.JS: "dirichlet",
        SpaceKind.LEVENSHTEIN: "dna",
        SpaceKind.SQFD: "signatures",
    }[SpaceKind(space_kind)]

