import numpy as np
import pytest

from coalclust.coalescent import Dendrogram, sample_prior
from coalclust.errors import ConfigError
from coalclust.kernels import build_covariance
from coalclust.synthetic import SyntheticSpec, diffuse, generate, generate_replicate, labeled_mixture


def test_spec_validation_and_presets():
    with pytest.raises(ConfigError):
        SyntheticSpec(n=1, d=3)
    with pytest.raises(ConfigError):
        SyntheticSpec(n=4, d=0)
    spec = SyntheticSpec.preset("d1")
    assert (spec.n, spec.d, spec.replicates) == (32, 32, 50)
    assert spec.theta == {"ell": 8.0, "sigma2": 1e-9}
    with pytest.raises(ConfigError):
        SyntheticSpec.preset("d9")


def test_zero_branch_lengths_give_root_value():
    tree = Dendrogram(4, ((0, 1, 0.0), (2, 3, 0.0), (4, 5, 0.0)))
    values = diffuse(tree, build_covariance("diagonal", d=3), np.random.default_rng(0))
    assert np.all(values == 0.0)


def test_pair_difference_variance_n2():
    cov = build_covariance("diagonal", d=1)
    rng = np.random.default_rng(1)
    diffs = []
    for _ in range(20000):
        tree = sample_prior(2, rng)
        x = diffuse(tree, cov, rng)
        diffs.append(x[0, 0] - x[1, 0])
    assert np.var(diffs) == pytest.approx(2.0, rel=0.05)


def test_leaf_covariance_is_root_time_times_phi():
    cov = build_covariance("squared_exponential", {"ell": 1.0, "sigma2": 0.1}, d=4)
    tree = Dendrogram(3, ((0, 1, 0.4), (2, 3, 1.5)))
    rng = np.random.default_rng(2)
    rows = np.array([diffuse(tree, cov, rng)[0] for _ in range(10000)])
    sample = np.cov(rows.T)
    assert np.linalg.norm(sample - 1.5 * cov.phi) / np.linalg.norm(1.5 * cov.phi) < 0.1


def test_leaf_cross_covariance_tracks_shared_path():
    cov = build_covariance("diagonal", d=1)
    tree = Dendrogram(3, ((0, 1, 0.4), (2, 3, 1.5)))
    rng = np.random.default_rng(3)
    leaves = np.array([diffuse(tree, cov, rng)[:3, 0] for _ in range(20000)])
    c = np.cov(leaves.T)
    assert c[0, 1] == pytest.approx(1.5 - 0.4, abs=0.05)
    assert abs(c[0, 2]) < 0.05


def test_generation_is_deterministic():
    spec = SyntheticSpec(n=6, d=3, seed=9, replicates=3)
    a, b = generate(spec), generate(spec)
    assert all(x.data.tobytes() == y.data.tobytes() and x.tree == y.tree for x, y in zip(a, b))
    assert a[0].data.tobytes() != a[1].data.tobytes()
    assert generate_replicate(spec, 2).data.tobytes() == a[2].data.tobytes()


def test_labeled_mixture_shapes():
    cov = build_covariance("diagonal", d=5)
    data, labels = labeled_mixture(23, 4, cov, np.random.default_rng(0))
    assert data.shape == (23, 5) and set(labels) == {0, 1, 2, 3}
    with pytest.raises(ConfigError):
        labeled_mixture(3, 4, cov, np.random.default_rng(0))
