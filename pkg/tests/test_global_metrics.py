import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from repalign import oracles
from repalign.data import EmbeddingSet
from repalign.errors import ArgumentError, DegenerateInputError
from repalign.global_metrics import (centered_distance_matrix, dcor, imbalance_from_distances,
                                     information_imbalance, rank_table)
from repalign.rng import Xoshiro256
from repalign.synth import random_baseline

from conftest import gaussian_set


def test_centered_distance_identical_rows():
    c = centered_distance_matrix(EmbeddingSet("m", [[1.0, 2.0], [1.0, 2.0]]))
    np.testing.assert_array_equal(c.raw, np.zeros((2, 2)))
    np.testing.assert_array_equal(c.centered, np.zeros((2, 2)))


def test_centered_distance_matches_four_term_loop():
    s = gaussian_set(40, 5, 0, normalized=False)
    c = centered_distance_matrix(s)
    x, n = s.values, 40
    a = [[float(np.sqrt(np.sum((x[k] - x[l]) ** 2))) for l in range(n)] for k in range(n)]
    row = [sum(a[k]) / n for k in range(n)]
    col = [sum(a[k][l] for k in range(n)) / n for l in range(n)]
    grand = sum(map(sum, a)) / n**2
    naive = [[a[k][l] - row[k] - col[l] + grand for l in range(n)] for k in range(n)]
    np.testing.assert_allclose(c.centered, naive, rtol=0, atol=1e-10)
    assert np.abs(c.centered.sum(axis=1)).max() < 1e-9
    assert np.all(c.raw >= 0) and np.all(c.raw == c.raw.T) and not c.raw.diagonal().any()


@pytest.mark.parametrize("d", [1, 2, 64])
def test_dcor_self_is_one(d):
    f = gaussian_set(50, d, d, normalized=False)
    assert dcor(f, f) == pytest.approx(1.0, abs=1e-10)


def test_dcor_isometry_invariance():
    for seed in range(5):
        f = gaussian_set(80, 6, seed, normalized=False)
        rot = special_ortho_group.rvs(6, random_state=seed)
        g = EmbeddingSet("g", f.values @ rot + np.arange(6.0))
        assert dcor(f, g) == pytest.approx(1.0, abs=1e-8)
        h = gaussian_set(80, 3, seed + 9, normalized=False)
        assert dcor(g, h) == pytest.approx(dcor(f, h), abs=1e-8)


def test_dcor_matches_oracle_and_symmetry():
    for seed in range(5):
        f, g = gaussian_set(64, 4, seed, False), gaussian_set(64, 7, seed + 1, False)
        assert dcor(f, g) == pytest.approx(oracles.oracle_dcor(f, g), abs=1e-10)
        assert dcor(f, g) == pytest.approx(dcor(g, f), abs=1e-10)
        p = np.random.default_rng(seed).permutation(64)
        assert dcor(f.take(p), g.take(p)) == pytest.approx(dcor(f, g), abs=1e-10)


def test_dcor_root_variant():
    f, g = gaussian_set(30, 3, 0, False), gaussian_set(30, 3, 1, False)
    assert dcor(f, g, root=True) == pytest.approx(np.sqrt(dcor(f, g)), abs=1e-15)


def test_dcor_null_calibration():
    vals = [dcor(random_baseline(1000, 8, 2 * s), random_baseline(1000, 8, 2 * s + 1)) for s in range(20)]
    assert max(vals) < 0.1


def test_dcor_degenerate():
    with pytest.raises(DegenerateInputError, match="same"):
        dcor(EmbeddingSet("same", np.ones((5, 2))), gaussian_set(5, 2, 0))


def test_rank_table_collinear():
    t = rank_table(EmbeddingSet("m", [[0.0], [1.0], [3.0]]))
    assert t.ranks[0].tolist() == [0, 1, 2]
    assert t.k_lists[0].tolist() == [1, 2]


def test_rank_table_duplicates_follow_index():
    t = rank_table(EmbeddingSet("m", [[0.0], [5.0], [5.0], [5.0]]))
    assert t.ranks[0].tolist() == [0, 1, 2, 3]
    assert t.ranks[2].tolist() == [3, 1, 0, 2]


@pytest.mark.parametrize("distance", ["euclidean", "inner-product"])
def test_rank_table_matches_full_sort(distance):
    for seed in range(3):
        s = gaussian_set(128, 4, seed)
        t = rank_table(s, distance)
        np.testing.assert_array_equal(t.ranks, oracles.oracle_ranks(s, distance))
        for row in range(128):
            assert sorted(np.delete(t.ranks[row], row).tolist()) == list(range(1, 128))
        c = t.copula()
        off = c[~np.eye(128, dtype=bool)]
        assert off.min() > 0 and off.max() < 1


def test_imbalance_self_k1():
    f = gaussian_set(300, 4, 0, False)
    p = information_imbalance(f, f, 1)
    assert p.forward == 2 / 300 and p.backward == 2 / 300


@pytest.mark.parametrize("k", [1, 4])
def test_imbalance_matches_oracle(k):
    f, g = gaussian_set(60, 3, 0, False), gaussian_set(60, 3, 1, False)
    p = information_imbalance(f, g, k)
    fo, bo = oracles.oracle_imbalance(f, g, k)
    assert (p.forward, p.backward) == pytest.approx((fo, bo), abs=1e-12)
    assert 2 / 60 <= p.forward <= 2 * 59 / 60


def test_imbalance_from_distances_monotone_invariance():
    from scipy.spatial.distance import cdist
    f, g = gaussian_set(90, 3, 2, False), gaussian_set(90, 5, 3, False)
    df, dg = cdist(f.values, f.values), cdist(g.values, g.values)
    base = imbalance_from_distances(df, dg, 3)
    cubed = imbalance_from_distances(df**3, dg**3, 3)
    assert base == cubed
    direct = information_imbalance(f, g, 3)
    assert (direct.forward, direct.backward) == (base.forward, base.backward)


def test_imbalance_asymmetry_richer_space_predicts():
    wins = 0
    for seed in range(10):
        gen = Xoshiro256(seed)
        z, w = gen.normal((2000, 2)), gen.normal((2000, 2))
        p = information_imbalance(EmbeddingSet("f", np.hstack([z, w])), EmbeddingSet("g", z), 1)
        wins += p.forward < p.backward
    assert wins == 10


def test_imbalance_independent_spaces_near_one():
    for seed in range(3):
        p = information_imbalance(random_baseline(2000, 3, 2 * seed), random_baseline(2000, 3, 2 * seed + 1), 1)
        assert 0.9 <= p.forward <= 1.1 and 0.9 <= p.backward <= 1.1


def test_imbalance_k_range():
    f = gaussian_set(10, 2, 0)
    with pytest.raises(ArgumentError):
        information_imbalance(f, f, 10)


@given(st.integers(0, 1000))
def test_imbalance_joint_permutation(seed):
    f, g = gaussian_set(40, 3, seed, False), gaussian_set(40, 2, seed + 1, False)
    p = np.random.default_rng(seed).permutation(40)
    a, b = information_imbalance(f, g, 2), information_imbalance(f.take(p), g.take(p), 2)
    assert (a.forward, a.backward) == pytest.approx((b.forward, b.backward), abs=1e-10)
