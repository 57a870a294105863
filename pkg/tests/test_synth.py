import numpy as np
import pytest

from repalign import oracles
from repalign.data import EmbeddingSet
from repalign.errors import ArgumentError
from repalign.global_metrics import dcor
from repalign.kernel import cknna
from repalign.synth import (SharedLatentSpec, random_baseline, shared_latent_pair, shared_latent_views,
                            uniform_manifold)


def test_pair_is_deterministic():
    spec = SharedLatentSpec(200, 4, 8, 12, 0.3, "tanh-mixed", seed=17)
    f1, g1 = shared_latent_pair(spec)
    f2, g2 = shared_latent_pair(spec)
    assert f1.values.tobytes() == f2.values.tobytes()
    assert g1.values.tobytes() == g2.values.tobytes()
    assert f1.values.shape == (200, 8) and g1.values.shape == (200, 12)


def test_seed_changes_output():
    a, _ = shared_latent_pair(SharedLatentSpec(50, 4, 8, 8, seed=1))
    b, _ = shared_latent_pair(SharedLatentSpec(50, 4, 8, 8, seed=2))
    assert not np.array_equal(a.values, b.values)


def test_noise_free_linear_views_share_a_subspace():
    f, g = shared_latent_pair(SharedLatentSpec(100, 3, 7, 9, 0.0, "linear", seed=4))
    assert np.linalg.matrix_rank(f.values) == 3
    assert np.linalg.matrix_rank(np.hstack([f.values, g.values])) == 3


def test_first_view_does_not_depend_on_later_views():
    one = shared_latent_views(80, 4, [10], [0.5], seed=9)
    two = shared_latent_views(80, 4, [10, 30], [0.5, 0.1], seed=9)
    assert one[0].values.tobytes() == two[0].values.tobytes()


@pytest.mark.parametrize("kwargs", [
    dict(n=10, d_latent=8, dims=[4], noise_sigmas=[0.0]),
    dict(n=10, d_latent=2, dims=[4], noise_sigmas=[-1.0]),
    dict(n=10, d_latent=2, dims=[4, 4], noise_sigmas=[0.0]),
    dict(n=0, d_latent=2, dims=[4], noise_sigmas=[0.0]),
    dict(n=10, d_latent=2, dims=[4], noise_sigmas=[0.0], warp="cubic"),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ArgumentError):
        shared_latent_views(**kwargs)


def test_tanh_views_allow_narrow_outputs():
    (v,) = shared_latent_views(20, 8, [4], [0.0], "tanh-mixed", 0)
    assert v.values.shape == (20, 4)


def test_noise_pushes_cknna_toward_null():
    means = []
    for sigma in (0.0, 1.0, 10.0):
        vals = [cknna(*shared_latent_pair(SharedLatentSpec(1000, 8, 32, 32, sigma, seed=s)), k=25)
                for s in range(3)]
        means.append(np.mean(vals))
    assert means[0] > means[1] > means[2]
    assert abs(means[2]) < 0.1


def test_random_baseline():
    b = random_baseline(1000, 32, 5)
    assert b.baseline and b.model_name == "random-baseline"
    assert b.values.tobytes() == random_baseline(1000, 32, 5).values.tobytes()
    assert abs(b.values.mean()) < 0.01 and abs(b.values.std() - 1) < 0.01
    with pytest.raises(ArgumentError):
        random_baseline(0, 3, 1)


@pytest.mark.parametrize("seed", range(3))
def test_baseline_vs_structured(seed):
    structured, _ = shared_latent_pair(SharedLatentSpec(1000, 8, 32, 32, 0.1, seed=seed))
    base = random_baseline(1000, 32, 100 + seed)
    assert abs(cknna(base, random_baseline(1000, 32, 200 + seed), k=25)) < 0.1
    assert dcor(base, structured) < 0.15


def test_uniform_manifolds():
    pts, d = uniform_manifold("line", 500, 0, ambient=5)
    assert d == 1 and pts.shape == (500, 5)
    assert np.linalg.matrix_rank(pts) == 1
    pts, d = uniform_manifold("disk", 2000, 0)
    assert d == 2 and np.all(np.hypot(pts[:, 0], pts[:, 1]) <= 1)
    pts, d = uniform_manifold("cube7", 300, 0)
    assert d == 7 and pts.min() >= 0 and pts.max() < 1
    with pytest.raises(ArgumentError):
        uniform_manifold("sphere", 10, 0)


def test_oracles_enforce_cap():
    big = EmbeddingSet("big", np.zeros((oracles.MAX_N + 1, 2)))
    for fn in (oracles.oracle_dcor, oracles.oracle_cka):
        with pytest.raises(ArgumentError):
            fn(big, big)
    with pytest.raises(ArgumentError):
        oracles.oracle_ranks(big)


def test_oracle_ranks_match_argsort():
    x = np.random.default_rng(0).normal(size=(20, 3))
    ranks = oracles.oracle_ranks(EmbeddingSet("x", x))
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    for i in range(20):
        order = [j for j in np.argsort(d[i], kind="stable") if j != i]
        assert [ranks[i][j] for j in order] == list(range(1, 20))
        assert ranks[i][i] == 0
