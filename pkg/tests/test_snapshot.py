import numpy as np
import pytest

from permkit.dataset import DataSet
from permkit.evaluation import GoldStandard, compute_gold
from permkit.methods import MethodConfig, build_index, search_index
from permkit.snapshot import (
    MAGIC, SnapshotError, index_bytes, load_index_snapshot, read_container, save_index_snapshot,
    write_container,
)
from permkit.spaces import Space

from conftest import uniform

SMALL = {
    "bruteforce": {},
    "permfilter": {"m": 16, "gamma": 0.1},
    "mifile": {"m": 16, "m_i": 8, "gamma": 0.1},
    "napp": {"m": 32, "m_i": 8, "chunk_size": 100},
    "vptree": {"bucket_size": 10},
    "swgraph": {"nn": 5},
}


@pytest.fixture(scope="module")
def data():
    return uniform(600, 6, seed=11)


@pytest.mark.parametrize("method", sorted(SMALL))
def test_round_trip_answers_identically(tmp_path, data, method):
    space = Space("l2")
    cfg = MethodConfig(method, SMALL[method])
    index = build_index(cfg, data, space, rng_seed=3)
    path = tmp_path / "idx.snap"
    save_index_snapshot(index, path)
    loaded = load_index_snapshot(path, data)
    queries = uniform(100, 6, seed=12)
    for i in range(len(queries)):
        a = search_index(cfg, index, queries[i], 10)
        b = search_index(cfg, loaded, queries[i], 10)
        np.testing.assert_array_equal(a.ids, b.ids)
        np.testing.assert_array_equal(a.distances, b.distances)
    assert index_bytes(loaded) == index_bytes(index)
    # resaving reproduces the same bytes
    save_index_snapshot(loaded, tmp_path / "again.snap")
    assert (tmp_path / "again.snap").read_bytes() == path.read_bytes()


def test_identical_builds_identical_bytes(tmp_path, data):
    space = Space("l2")
    cfg = MethodConfig("napp", SMALL["napp"])
    for name in ("a", "b"):
        save_index_snapshot(build_index(cfg, data, space, rng_seed=5), tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    save_index_snapshot(build_index(cfg, data, space, rng_seed=6), tmp_path / "c")
    assert (tmp_path / "a").read_bytes() != (tmp_path / "c").read_bytes()


def test_string_space_snapshot(tmp_path):
    data = DataSet.strings(["ACGT", "AC", "", "GGTA", "TTTT", "ACGA", "CA", "GATTACA"])
    space = Space("normleven")
    cfg = MethodConfig("mifile", {"m": 4, "m_i": 2, "gamma": 1.0})
    index = build_index(cfg, data, space)
    save_index_snapshot(index, tmp_path / "s")
    loaded = load_index_snapshot(tmp_path / "s", data)
    assert search_index(cfg, loaded, "ACG", 3).ids.tolist() == search_index(cfg, index, "ACG", 3).ids.tolist()


@pytest.fixture
def snap(tmp_path, data):
    path = tmp_path / "x.snap"
    save_index_snapshot(build_index(MethodConfig("vptree", {}), data, Space("l2")), path)
    return path


def test_truncated(snap, data):
    raw = snap.read_bytes()
    for cut in (5, 40, len(raw) - 1, len(raw) // 2):
        snap.write_bytes(raw[:cut])
        with pytest.raises(SnapshotError):
            load_index_snapshot(snap, data)


def test_bad_magic_and_version(snap, data):
    raw = bytearray(snap.read_bytes())
    assert raw[:8] == MAGIC
    snap.write_bytes(b"NOTASNAP" + raw[8:])
    with pytest.raises(SnapshotError, match="not a permkit"):
        load_index_snapshot(snap, data)
    raw[8:12] = (2).to_bytes(4, "little")
    snap.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="version"):
        load_index_snapshot(snap, data)


def test_checksum(snap, data):
    raw = bytearray(snap.read_bytes())
    raw[-40] ^= 0xFF
    snap.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="checksum"):
        load_index_snapshot(snap, data)


def test_dataset_mismatch(snap, data):
    other = DataSet.dense(data.objects + 1e-9)
    with pytest.raises(SnapshotError, match="dataset"):
        load_index_snapshot(snap, other)


def test_missing_file(tmp_path, data):
    with pytest.raises(SnapshotError):
        load_index_snapshot(tmp_path / "nope", data)


def test_container_preserves_dtypes(tmp_path):
    arrays = {"a": np.arange(5, dtype=np.uint16), "b": np.ones((2, 3), dtype=">f8"), "e": np.zeros(0)}
    write_container(tmp_path / "c", {"x": 1}, arrays)
    meta, back = read_container(tmp_path / "c")
    assert meta == {"x": 1}
    assert back["a"].dtype == np.uint16 and back["a"].tolist() == [0, 1, 2, 3, 4]
    assert back["b"].shape == (2, 3) and np.all(back["b"] == 1)
    assert back["e"].size == 0


def test_gold_round_trip_bit_exact(tmp_path, data):
    space = Space("l2")
    gold = compute_gold(data.subset(np.arange(500)), data.subset(np.arange(500, 600)), space, 10, split_id=2)
    gold.save(tmp_path / "g")
    back = GoldStandard.load(tmp_path / "g")
    assert back.ids.tobytes() == gold.ids.tobytes()
    assert back.distances.tobytes() == gold.distances.tobytes()
    assert (back.k, back.space_kind, back.split_id) == (10, "l2", 2)
    with pytest.raises(SnapshotError):
        GoldStandard.load(tmp_path / "nope")
