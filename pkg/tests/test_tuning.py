import pytest

from permkit.dataset import DataSet
from permkit.data_io import generate_synthetic
from permkit.spaces import Space
from permkit.tuning import _gamma_counts, tune
from permkit.vptree import VpTuneGrid

from conftest import uniform


@pytest.fixture(scope="module")
def sample():
    return uniform(1500, 6, 3)


def test_napp_recall_falls_with_threshold(sample):
    res = tune("napp", sample, Space("l2"), band=(0.85, 0.95), num_queries=30,
               base_params={"m": 64, "m_i": 8})
    recalls = [row["recall"] for row in res.trace]
    assert [row["t"] for row in res.trace] == list(range(1, 9))
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert res.params["m_i"] == 8
    if res.reached:
        assert 0.85 <= res.recall <= 0.95


def test_tuning_is_deterministic(sample):
    a = tune("permfilter", sample, Space("l2"), num_queries=20, base_params={"m": 16})
    b = tune("permfilter", sample, Space("l2"), num_queries=20, base_params={"m": 16})
    assert a.to_dict() == b.to_dict()


def test_unreachable_band_is_flagged():
    # with three pivots and one indexed pivot a recall of exactly 0.5 is out of reach
    data = uniform(400, 4, 1)
    res = tune("napp", data, Space("l2"), band=(0.5, 0.5), num_queries=10,
               base_params={"m": 3, "m_i": 1})
    assert not res.reached
    d = res.to_dict()
    assert d["unreached"] is True and d["reached"] is False
    assert d["trace"]


def test_best_point_inside_band_is_most_efficient(sample):
    res = tune("mifile", sample, Space("l2"), band=(0.6, 1.0), num_queries=20,
               base_params={"m": 16, "m_i": 8})
    assert res.reached
    inside = [r for r in res.trace if "recall" in r and 0.6 <= r["recall"] <= 1.0]
    assert res.efficiency == max(r["efficiency"] for r in inside)


def test_swgraph_and_vptree_run():
    data = uniform(600, 3, 2)
    sw = tune("swgraph", data, Space("l2"), band=(0.9, 1.0), num_queries=20)
    assert {"nn", "query_attempts"} <= set(sw.params)
    vp = tune("vptree", data, Space("l2"), band=(0.9, 1.0), num_queries=20,
              vp_grid=VpTuneGrid(points=4, max_iter=3))
    assert "alpha_left" in vp.params


def test_histogram_space_tunes():
    data = generate_synthetic("dirichlet", 800, 0, dim=8)
    res = tune("napp", data, Space("jsdiv"), num_queries=20, base_params={"m": 32, "m_i": 8})
    assert res.trace


def test_invalid_inputs(sample):
    with pytest.raises(ValueError):
        tune("nope", sample, Space("l2"))
    with pytest.raises(ValueError):
        tune("napp", sample, Space("l2"), band=(0.9, 0.8))


def test_gamma_counts_respect_k():
    counts = _gamma_counts(1000, 10)
    assert counts[0] == 10 and counts[-1] == 1000
    assert counts == sorted(set(counts))


def test_strings_tune():
    data = DataSet.strings(generate_synthetic("dna", 300, 1).objects)
    res = tune("permfilter", data, Space("normleven"), num_queries=10, base_params={"m": 8})
    assert 0.0 <= res.recall <= 1.0
