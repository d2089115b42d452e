import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import cosine_oracle, js_oracle, kl_oracle, norm_lev_oracle, sqfd_oracle
from permkit.data_io import generate_synthetic
from permkit.dataset import DataSet
from permkit.spaces import (
    Space, SpaceKind, cosine_distance, js_divergence, kl_divergence, l2, levenshtein, mu_defectiveness_probe,
    normalized_levenshtein, sqfd, triangle_violation_rate,
)

histograms = st.integers(2, 12).flatmap(
    lambda d: st.lists(st.floats(0.01, 10.0), min_size=d, max_size=d).map(lambda v: np.array(v) / np.sum(v))
)
dna = st.text(alphabet="ACGT", min_size=0, max_size=64)


def random_histograms(n, dim, seed):
    return generate_synthetic("dirichlet", n, seed, dim=dim).objects


# ---- L2 ------------------------------------------------------------------------


def test_l2_examples():
    assert l2([0, 0], [3, 4]) == 5.0
    assert l2([1, 2, 3], [4, 6, 3]) == 5.0
    x = np.array([0.3, -1.2, 7.0])
    assert l2(x, x) == 0.0


def test_l2_dimension_mismatch():
    with pytest.raises(ValueError):
        l2([1, 2], [1, 2, 3])


def test_l2_matches_numpy(rng):
    for _ in range(200):
        x, y = rng.normal(size=(2, 17))
        assert l2(x, y) == pytest.approx(np.linalg.norm(x - y), rel=1e-9)


# ---- cosine --------------------------------------------------------------------


def sparse(d):
    idx = np.array(sorted(d), dtype=np.int64)
    return idx, np.array([d[i] for i in idx], dtype=np.float64)


def test_cosine_known_values():
    assert cosine_distance(sparse({1: 1.0}), sparse({2: 1.0})) == pytest.approx(1.0, abs=1e-15)
    assert cosine_distance(sparse({1: 1.0, 2: 1.0}), sparse({1: 1.0})) == pytest.approx(1 - 1 / math.sqrt(2), rel=1e-12)
    x = sparse({0: 0.5, 7: 2.0, 9: -1.0})
    assert cosine_distance(x, x) == pytest.approx(0.0, abs=1e-12)


def test_cosine_zero_norm_rejected():
    with pytest.raises(ValueError):
        cosine_distance(sparse({}), sparse({1: 1.0}))
    with pytest.raises(ValueError):
        cosine_distance(sparse({3: 0.0}), sparse({1: 1.0}))


def test_cosine_matches_dense_oracle(rng):
    dim = 60
    for _ in range(300):
        dx = {int(i): float(rng.normal()) for i in rng.choice(dim, rng.integers(1, 15), replace=False)}
        dy = {int(i): float(rng.normal()) for i in rng.choice(dim, rng.integers(1, 15), replace=False)}
        got = cosine_distance(sparse(dx), sparse(dy))
        assert got == pytest.approx(cosine_oracle(dx, dy, dim), rel=1e-9, abs=1e-12)
        assert 0.0 <= got <= 2.0


def test_cosine_batch_matches_pairwise():
    data = generate_synthetic("sparse", 200, 3, dim=50, nnz=5)
    space = Space("cosine")
    q = data[17]
    batch = space.query_distances(data, q)
    single = np.array([cosine_distance(data[i], q) for i in range(len(data))])
    np.testing.assert_allclose(batch, single, rtol=1e-9, atol=1e-12)


# ---- KL / JS -------------------------------------------------------------------


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), rel=1e-12)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.14384103622589042, rel=1e-12)
    a, b = [0.9, 0.1], [0.5, 0.5]
    assert kl_divergence(a, b) != kl_divergence(b, a)
    assert kl_divergence(a, a) == 0.0


def test_kl_rejects_non_positive():
    with pytest.raises(ValueError):
        kl_divergence([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


def test_kl_cached_log_is_bitwise_identical():
    X = random_histograms(1000, 16, 1)
    Y = random_histograms(1000, 16, 2)
    logs = np.log(X)
    for x, lx, y in zip(X, logs, Y):
        assert kl_divergence(x, y, precomputed_log_x=lx) == kl_divergence(x, y)


def test_kl_batch_uses_same_values_as_pair_function():
    data = DataSet.dense(random_histograms(300, 10, 3))
    q = random_histograms(1, 10, 4)[0]
    left = Space("kldiv").query_distances(data, q)
    right = Space("kldiv", query_mode="right").query_distances(data, q)
    for i in range(len(data)):
        assert left[i] == pytest.approx(kl_divergence(data[i], q), rel=1e-12)
        assert right[i] == pytest.approx(kl_divergence(q, data[i]), rel=1e-12)


def test_kl_matches_oracle():
    X, Y = random_histograms(200, 8, 5), random_histograms(200, 8, 6)
    for x, y in zip(X, Y):
        assert kl_divergence(x, y) == pytest.approx(kl_oracle(x, y), rel=1e-9, abs=1e-15)


def test_js_examples():
    # value of the defining sum, natural log
    assert js_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.03382207556860528, rel=1e-9)
    x = np.array([0.2, 0.3, 0.5])
    assert js_divergence(x, x) == 0.0


def test_js_symmetric_exactly():
    X, Y = random_histograms(1000, 12, 7), random_histograms(1000, 12, 8)
    for x, y in zip(X, Y):
        assert js_divergence(x, y) == js_divergence(y, x)
        assert js_divergence(x, y) == pytest.approx(js_oracle(x, y), rel=1e-9, abs=1e-14)


@given(histograms, st.integers(0, 2**31))
def test_js_nonnegative(x, seed):
    y = np.random.default_rng(seed).dirichlet(np.ones(len(x))) + 1e-6
    y /= y.sum()
    assert js_divergence(x, y) >= 0.0


def test_js_rejects_zero():
    with pytest.raises(ValueError):
        js_divergence([0.0, 1.0], [0.5, 0.5])


# ---- Levenshtein ---------------------------------------------------------------


def test_levenshtein_examples():
    assert normalized_levenshtein("ACGT", "ACGT") == 0.0
    assert normalized_levenshtein("ACGT", "ACGA") == 0.25
    assert normalized_levenshtein("A", "") == 1.0
    assert normalized_levenshtein("", "") == 0.0
    assert levenshtein("kitten", "sitting") == 3


def test_levenshtein_matches_dp_oracle(rng):
    letters = np.array(list("ACGT"))
    for _ in range(1000):
        x = "".join(rng.choice(letters, rng.integers(1, 65)))
        y = "".join(rng.choice(letters, rng.integers(1, 65)))
        assert normalized_levenshtein(x, y) == norm_lev_oracle(x, y)


@given(dna, dna)
def test_levenshtein_properties(x, y):
    d = normalized_levenshtein(x, y)
    assert 0.0 <= d <= 1.0
    assert d == normalized_levenshtein(y, x)
    assert (d == 0.0) == (x == y)


def test_levenshtein_unicode():
    assert levenshtein("héllo", "hello") == 1
    assert normalized_levenshtein("日本", "日本語") == pytest.approx(1 / 3)


def test_levenshtein_batch_matches_pair():
    data = generate_synthetic("dna", 100, 1)
    q = "ACGTACGTTTGA"
    batch = Space("normleven").query_distances(data, q)
    assert batch.tolist() == [normalized_levenshtein(s, q) for s in data.objects]


# ---- SQFD ----------------------------------------------------------------------


def one_cluster(c):
    return np.asarray(c, dtype=float).reshape(1, 7), np.array([1.0])


def test_sqfd_two_unit_clusters():
    x = one_cluster(np.zeros(7))
    y = one_cluster(np.eye(7)[0])
    assert sqfd(x, y) == pytest.approx(1.0, rel=1e-12)


def test_sqfd_matches_oracle_and_is_symmetric():
    sigs = generate_synthetic("signatures", 200, 2, clusters=6).objects
    for x, y in zip(sigs[::2], sigs[1::2]):
        d = sqfd(x, y)
        assert d == sqfd(y, x)
        assert d == pytest.approx(sqfd_oracle(x[0], x[1], y[0], y[1]), rel=1e-9, abs=1e-12)
    for x in sigs:
        assert sqfd(x, x) == 0.0


def test_sqfd_alpha_is_configurable():
    x, y = one_cluster(np.zeros(7)), one_cluster(np.eye(7)[0])
    space = Space("sqfd", sqfd_alpha=2.0)
    # 2/2 - 2/3 = 1/3
    assert space.distance(x, y) == pytest.approx(math.sqrt(1 / 3), rel=1e-12)


# ---- Space ---------------------------------------------------------------------


SAMPLES = {
    "l2": lambda: generate_synthetic("uniform", 60, 1, dim=5),
    "cosine": lambda: generate_synthetic("sparse", 60, 1, dim=30, nnz=6),
    "kldiv": lambda: generate_synthetic("dirichlet", 60, 1, dim=6),
    "jsdiv": lambda: generate_synthetic("dirichlet", 60, 1, dim=6),
    "normleven": lambda: generate_synthetic("dna", 60, 1),
    "sqfd": lambda: generate_synthetic("signatures", 60, 1),
}


@pytest.mark.parametrize("kind", list(SAMPLES))
def test_space_symmetry_and_identity(kind):
    space = Space(kind)
    data = SAMPLES[kind]()
    assert space.symmetric == (kind != "kldiv")
    rng = np.random.default_rng(0)
    for _ in range(1000 if kind != "sqfd" else 200):
        i, j = rng.integers(0, len(data), 2)
        if space.symmetric:
            assert space.distance(data[i], data[j]) == space.distance(data[j], data[i])
        assert abs(space.distance(data[i], data[i])) <= 1e-12


@pytest.mark.parametrize("kind", list(SAMPLES))
@pytest.mark.parametrize("mode", ["left", "right"])
def test_batches_agree_with_pair_distance(kind, mode):
    space = Space(kind, query_mode=mode)
    data = SAMPLES[kind]()
    q = data[3]
    batch = space.query_distances(data, q)
    ref = [space.query_distance(data[i], q) for i in range(len(data))]
    np.testing.assert_allclose(batch, ref, rtol=1e-9, atol=1e-12)
    pw = space.pairwise(data.subset(slice(0, 7)), data)
    for i in range(7):
        np.testing.assert_array_equal(pw[i], space.right_batch(data[i], data))


def test_space_serialization_round_trip():
    s = Space("kldiv", query_mode="right")
    assert Space.from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        Space("nope")
    with pytest.raises(ValueError):
        Space("l2", query_mode="middle")


def test_validate_rejects_wrong_kind():
    with pytest.raises(ValueError):
        Space("normleven").validate(generate_synthetic("uniform", 5, 0))


def test_histogram_validation():
    with pytest.raises(ValueError):
        Space("kldiv").validate(DataSet.dense([[0.5, 0.6]]))
    Space("kldiv").validate(DataSet.dense([[0.5, 0.5]]))


# ---- diagnostics ---------------------------------------------------------------


def test_triangle_rate_zero_for_l2():
    data = generate_synthetic("gaussian-mixture", 500, 3, dim=8)
    assert triangle_violation_rate(data, Space("l2"), 20_000, 1) == 0.0
    assert triangle_violation_rate(data, Space("l2"), 0, 1) == 0.0


def test_triangle_rate_empty_dataset():
    with pytest.raises(ValueError):
        triangle_violation_rate(DataSet.dense(np.zeros((0, 3))), Space("l2"), 10)


def test_triangle_rate_detects_kl_violations():
    hist = generate_synthetic("dirichlet", 300, 4, dim=8, alpha=0.3)
    assert triangle_violation_rate(hist, Space("kldiv"), 20_000, 0) > 0.0


def test_mu_probe():
    data = generate_synthetic("uniform", 300, 2, dim=4)
    assert mu_defectiveness_probe(data, Space("l2"), "id", 20_000, 0) <= 1 + 1e-9
    assert mu_defectiveness_probe(data, Space("l2"), "id", 0, 0) == 0.0
    hist = generate_synthetic("dirichlet", 300, 2, dim=8)
    assert mu_defectiveness_probe(hist, Space("jsdiv"), "sqrt", 20_000, 0) <= 1 + 1e-6
    # KL is far from a metric
    assert mu_defectiveness_probe(hist, Space("kldiv"), "id", 20_000, 0) > 1.0


def test_space_kind_values():
    assert {k.value for k in SpaceKind} == {"l2", "cosine", "kldiv", "jsdiv", "normleven", "sqfd"}
