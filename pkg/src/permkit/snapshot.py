"""Binary snapshots of built indexes.

Layout: ``MAGIC | u32 version | u64 header length | JSON header | raw array
payload | sha256 of everything before it``.  The header records every array's
dtype, shape and offset, plus the content hash of the dataset the index was
built on.  Bytes depend only on the index contents, so identical builds give
identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DataKind, DataSet
from .inverted import MiFileIndex, NappIndex, chunk_bounds_for
from .permfilter import PermFilterIndex
from .permutation import PivotSet
from .results import ExactIndex
from .spaces import Space
from .swgraph import ProximityGraph
from .vptree import VpTree

MAGIC = b"PERMKIT\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DIGEST = 32


class SnapshotError(Exception):
    """The snapshot is unreadable, corrupt, of another version, or for other data."""


def write_container(path, meta: dict, arrays: dict[str, np.ndarray]):
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<")) if arr.dtype.byteorder == ">" else arr
        blob = arr.tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")).encode()
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(blobs)
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read {path}: {exc}") from None
    if len(raw) < _PREFIX.size + _DIGEST:
        raise SnapshotError(f"{path}: truncated file")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: not a permkit snapshot")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"{path}: snapshot format version {version}, this build reads {FORMAT_VERSION}")
    body, digest = raw[:-_DIGEST], raw[-_DIGEST:]
    if _PREFIX.size + hlen > len(body):
        raise SnapshotError(f"{path}: truncated file")
    try:
        header = json.loads(body[_PREFIX.size : _PREFIX.size + hlen])
    except ValueError:
        raise SnapshotError(f"{path}: corrupt header") from None
    payload = body[_PREFIX.size + hlen :]
    expected = sum(e["nbytes"] for e in header["arrays"])
    if len(payload) != expected:
        raise SnapshotError(f"{path}: truncated file (payload {len(payload)} of {expected} bytes)")
    if hashlib.sha256(body).digest() != digest:
        raise SnapshotError(f"{path}: checksum mismatch")
    arrays = {}
    for e in header["arrays"]:
        buf = payload[e["offset"] : e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return header["meta"], arrays


# --------------------------------------------------------------------------
# index <-> (meta, arrays)


def _pivot_state(p: PivotSet, arrays: dict) -> dict:
    for name, arr in p.objects.pack().items():
        arrays[f"pivots/{name}"] = arr
    if p.ids is not None:
        arrays["pivot_ids"] = p.ids.astype("<i8")
    return {"pivot_kind": p.objects.kind.value, "pivot_seed": p.rng_seed}


def _pivot_load(meta: dict, arrays: dict) -> PivotSet:
    objs = DataSet.unpack(DataKind(meta["pivot_kind"]),
                          {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("pivots/")})
    ids = arrays.get("pivot_ids")
    return PivotSet(objs, None if ids is None else ids.astype(np.int64), meta["pivot_seed"])


def index_state(index) -> tuple[dict, dict[str, np.ndarray]]:
    arrays: dict[str, np.ndarray] = {}
    meta = {"index_kind": index.kind, "space": index.space.to_dict(), "library_version": __version__,
            "dataset_hash": index.dataset.content_hash(), "dataset_size": len(index.dataset),
            "dataset_kind": index.dataset.kind.value}
    if isinstance(index, ExactIndex):
        return meta, arrays
    meta["rng_seed"] = index.rng_seed
    if isinstance(index, PermFilterIndex):
        meta.update(_pivot_state(index.pivots, arrays), mode=index.mode, b=index.b)
        arrays["perms" if index.mode == "full" else "bits"] = index.perms if index.mode == "full" else index.bits
    elif isinstance(index, MiFileIndex):
        meta.update(_pivot_state(index.pivots, arrays), m_i=index.m_i)
        arrays.update(offsets=index.offsets, pos=index.pos, ids=index.ids)
    elif isinstance(index, NappIndex):
        meta.update(_pivot_state(index.pivots, arrays), m_i=index.m_i, chunk_size=index.chunk_size)
        arrays.update(offsets=index.offsets, ids=index.ids)
    elif isinstance(index, VpTree):
        meta["bucket_size"] = index.bucket_size
        for name in ("pivot", "radius", "left", "right", "bstart", "bend", "order"):
            arrays[name] = getattr(index, name)
    elif isinstance(index, ProximityGraph):
        meta.update(nn=index.nn, attempts=index.attempts)
        arrays.update(offsets=index.offsets, neighbors=index.neighbors)
    else:
        raise TypeError(f"cannot snapshot {type(index).__name__}")
    return meta, arrays


def index_bytes(index) -> int:
    """Memory held by the index structures (the dataset itself excluded)."""
    return int(sum(a.nbytes for a in index_state(index)[1].values()))


def save_index_snapshot(index, path):
    meta, arrays = index_state(index)
    write_container(path, meta, arrays)


def load_index_snapshot(path, dataset: DataSet):
    meta, arrays = read_container(path)
    if "index_kind" not in meta:
        raise SnapshotError(f"{path}: not an index snapshot")
    if meta["dataset_hash"] != dataset.content_hash():
        raise SnapshotError(f"{path}: dataset does not match the one the index was built on")
    space = Space.from_dict(meta["space"])
    kind = meta["index_kind"]
    seed = meta.get("rng_seed", 0)
    if kind == "bruteforce":
        return ExactIndex(dataset, space)
    if kind == "permfilter":
        return PermFilterIndex(dataset, space, _pivot_load(meta, arrays), meta["mode"],
                               perms=arrays.get("perms"), bits=arrays.get("bits"), b=meta["b"], rng_seed=seed)
    if kind == "mifile":
        return MiFileIndex(dataset, space, _pivot_load(meta, arrays), meta["m_i"],
                           arrays["offsets"], arrays["pos"], arrays["ids"], seed)
    if kind == "napp":
        offsets, ids = arrays["offsets"], arrays["ids"]
        bounds = chunk_bounds_for(offsets, ids, len(dataset), meta["chunk_size"])
        return NappIndex(dataset, space, _pivot_load(meta, arrays), meta["m_i"], meta["chunk_size"],
                         offsets, ids, bounds, seed)
    if kind == "vptree":
        return VpTree(dataset, space, meta["bucket_size"], arrays["pivot"], arrays["radius"], arrays["left"],
                      arrays["right"], arrays["bstart"], arrays["bend"], arrays["order"], seed)
    if kind == "swgraph":
        return ProximityGraph(dataset, space, meta["nn"], meta["attempts"], arrays["offsets"],
                              arrays["neighbors"], seed)
    raise SnapshotError(f"{path}: unknown index kind {kind!r}")
