import numpy as np
import pytest

from permkit.dataset import DataSet
from permkit.evaluation import (
    GoldStandard, Split, compute_gold, make_splits, mean_recall, projection_scatter, recall_vs_fraction_curve,
    run_benchmark, run_benchmark_suite, split_records, strip_wall_clock, write_csv, write_jsonl,
)
from permkit.methods import MethodConfig
from permkit.results import QueryResult, recall
from permkit.spaces import Space

from conftest import A, B, C, D, FOUR_POINTS, uniform


def test_splits_disjoint_and_deterministic():
    data = uniform(200, 3, 0)
    splits = make_splits(data, 4, 30, rng_seed=9)
    assert len(splits) == 4
    for s in splits:
        assert len(s.query_ids) == 30 and len(s.index_ids) == 170
        assert np.intersect1d(s.index_ids, s.query_ids).size == 0
        assert np.array_equal(np.sort(np.concatenate([s.index_ids, s.query_ids])), np.arange(200))
    again = make_splits(data, 4, 30, rng_seed=9)
    assert all(np.array_equal(a.query_ids, b.query_ids) for a, b in zip(splits, again))
    assert not np.array_equal(splits[0].query_ids, splits[1].query_ids)


def test_split_sizes():
    data = uniform(10, 2, 0)
    assert len(make_splits(data, 1, 9)[0].index_ids) == 1
    for bad in (0, 10, 11):
        with pytest.raises(ValueError):
            make_splits(data, 1, bad)
    with pytest.raises(ValueError):
        make_splits(data, 0, 3)


def test_gold_self_match():
    data = uniform(50, 4, 1)
    gold = compute_gold(data, data, Space("l2"), k=1)
    assert gold.ids[:, 0].tolist() == list(range(50))
    assert np.all(gold.distances == 0)


def test_gold_k_exceeds_index():
    data = uniform(5, 2, 2)
    gold = compute_gold(data, uniform(3, 2, 3), Space("l2"), k=10)
    assert gold.ids.shape == (3, 5)
    assert all(sorted(row) == list(range(5)) for row in gold.ids.tolist())
    # the denominator shrinks to the index size, so returning everything is perfect recall
    res = [QueryResult(np.arange(5), np.zeros(5)) for _ in range(3)]
    assert mean_recall(res, gold) == 1.0


def test_gold_four_points():
    data = DataSet.dense(FOUR_POINTS)
    gold = compute_gold(data.subset([B, C, D]), data.subset([A]), Space("l2"), k=3)
    assert [[B, C, D][i] for i in gold.ids[0]] == [B, D, C]


def test_gold_threads_agree():
    data, queries = uniform(300, 5, 4), uniform(20, 5, 5)
    g1 = compute_gold(data, queries, Space("l2"), 10, num_threads=1)
    g2 = compute_gold(data, queries, Space("l2"), 10, num_threads=3)
    assert np.array_equal(g1.ids, g2.ids) and np.array_equal(g1.distances, g2.distances)


def test_recall_cases():
    assert recall([1, 2, 3], [3, 2, 1]) == 1.0
    assert recall([4, 5, 6], [1, 2, 3]) == 0.0
    assert recall(list(range(5)) + list(range(20, 25)), list(range(10))) == 0.5
    assert recall([], []) == 1.0
    gold = GoldStandard(np.array([[0, 1]]), np.zeros((1, 2)), 2, "l2")
    assert mean_recall([QueryResult(np.array([1, 7]), np.zeros(2))], gold) == 0.5


@pytest.fixture(scope="module")
def bench_data():
    return uniform(2000, 8, 6)


def test_benchmark_bruteforce(bench_data):
    splits = make_splits(bench_data, 2, 50, rng_seed=1)
    rep = run_benchmark(MethodConfig("bruteforce"), bench_data, Space("l2"), 10, splits)
    assert rep.recall == 1.0
    assert all(s.recall == 1.0 and s.error is None for s in rep.splits)
    # same code path as the baseline; only timer noise separates them
    assert 0.5 < rep.improvement_in_efficiency < 2.0
    assert rep.splits[0].distance_computations == 1950


def test_benchmark_full_budget_permfilter(bench_data):
    splits = make_splits(bench_data, 1, 50, rng_seed=1)
    cfg = MethodConfig("permfilter", {"m": 16, "gamma": 1.0})
    rep = run_benchmark(cfg, bench_data, Space("l2"), 10, splits)
    assert rep.recall == 1.0
    assert rep.improvement_in_efficiency < 1.0
    assert rep.splits[0].index_bytes > 0


def test_benchmark_error_recorded(bench_data):
    splits = make_splits(bench_data, 1, 20)
    rep = run_benchmark(MethodConfig("permfilter", {"m": 8, "gamma": 2}), bench_data, Space("l2"), 10, splits)
    assert rep.splits[0].error is not None and rep.recall is None


def test_benchmark_records_reproducible(tmp_path, bench_data):
    cfgs = [MethodConfig("napp", {"m": 64, "m_i": 8, "t": 2}), MethodConfig("swgraph", {"nn": 5})]
    splits = make_splits(bench_data, 2, 30, rng_seed=2)
    runs = [split_records(run_benchmark_suite(cfgs, bench_data, Space("l2"), 10, splits, rng_seed=4))
            for _ in range(2)]
    assert len(runs[0]) == 4
    assert strip_wall_clock(runs[0]) == strip_wall_clock(runs[1])
    assert "build_time_ms" not in strip_wall_clock(runs[0])[0]
    write_jsonl(runs[0], tmp_path / "r.jsonl")
    write_csv(runs[0], tmp_path / "r.csv")
    assert len((tmp_path / "r.jsonl").read_text().splitlines()) == 4
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 5


def test_projection_scatter_correlates():
    data = uniform(3000, 8, 7)
    pts = projection_scatter(data, Space("l2"), m=64, num_pairs=10_000, rng_seed=1)
    assert pts.shape == (10_000, 2)
    assert np.all(pts[:, 0] > 0)
    assert np.corrcoef(pts[:, 0], pts[:, 1])[0, 1] > 0.5
    rp = projection_scatter(data, Space("l2"), m=16, num_pairs=500, projector="random-projection")
    assert rp.shape == (500, 2)
    with pytest.raises(ValueError):
        projection_scatter(data, Space("l2"), random_share=1.5)


def test_recall_curve_monotone():
    data = uniform(3000, 6, 8)
    curve = recall_vs_fraction_curve(data, Space("l2"), m=32, fractions=(0.001, 0.01, 0.05, 0.2, 1.0),
                                     num_queries=50)
    assert curve.recall == sorted(curve.recall)
    assert curve.recall[-1] == 1.0
    assert curve.candidates[-1] == 2950
    with pytest.raises(ValueError):
        recall_vs_fraction_curve(data, Space("l2"), fractions=(0.0,), num_queries=5)


def test_split_parts():
    data = uniform(10, 2, 0)
    s = Split(0, np.array([0, 2, 4]), np.array([9, 1]))
    ip, qp = s.parts(data)
    assert np.array_equal(qp.objects, data.objects[[9, 1]]) and len(ip) == 3
