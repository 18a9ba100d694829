"""Synthetic data with a known tree: coalescent draw plus Gaussian diffusion.

The root is placed at the zero vector (the likelihood only sees mean
differences, so the choice is immaterial) and each child is drawn from
``N(parent, (t_parent - t_child) * Phi)``.
"""

from dataclasses import dataclass, field, asdict
import math

import numpy as np

from .coalescent import Dendrogram, sample_prior
from .errors import ConfigError
from .kernels import KINDS, build_covariance
from .seeding import REPLICATE, derive_rng

PRESETS = {"d1": (32, 32), "d2": (64, 64), "d3": (128, 128)}


def default_theta(kind, d):
    if kind == "squared_exponential":
        return {"ell": d / 4.0, "sigma2": 1e-9}
    if kind == "matern32_grid":
        side = math.sqrt(d)
        return {"ell_x": side / 4.0, "ell_y": side / 4.0, "sigma2": 1e-9}
    return {"variances": tuple([1.0] * d)}


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    kernel: str = "squared_exponential"
    theta: dict | None = None
    seed: int = 0
    replicates: int = 1

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ConfigError(f"need n >= 2 and d >= 1, got n={self.n}, d={self.d}")
        if self.kernel not in KINDS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.theta is None:
            object.__setattr__(self, "theta", default_theta(self.kernel, self.d))

    @classmethod
    def preset(cls, name, **overrides):
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        n, d = PRESETS[name]
        fields = {"n": n, "d": d, "replicates": 50}
        fields.update(overrides)
        return cls(**fields)

    def covariance(self):
        return build_covariance(self.kernel, dict(self.theta), d=self.d)

    def to_dict(self):
        out = asdict(self)
        out["theta"] = dict(self.theta)
        return out


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    data: np.ndarray
    tree: Dendrogram
    theta: dict
    cov: object
    replicate: int = 0
    node_values: np.ndarray = field(default=None, repr=False)


def diffuse(tree, cov, rng):
    """Values of every node (leaves first, root last) under Brownian diffusion from a zero root."""
    n, d = tree.n_leaves, cov.d
    times = tree.node_times()
    noise = rng.standard_normal((2 * n - 2, d))
    values = np.zeros((2 * n - 1, d))
    children = tree.children()
    for node in range(2 * n - 2, n - 1, -1):
        for c in children[node]:
            step = math.sqrt(max(times[node] - times[c], 0.0))
            values[c] = values[node] + step * (cov.chol @ noise[c])
    return values


def generate_replicate(spec, replicate=0, cov=None):
    rng = derive_rng(spec.seed, REPLICATE, replicate)
    cov = spec.covariance() if cov is None else cov
    tree = sample_prior(spec.n, rng)
    values = diffuse(tree, cov, rng)
    return SyntheticDataset(values[: spec.n].copy(), tree, dict(spec.theta), cov, replicate, values)


def generate(spec):
    """All replicates of ``spec`` as a list of SyntheticDataset."""
    cov = spec.covariance()
    return [generate_replicate(spec, i, cov) for i in range(spec.replicates)]


def labeled_mixture(n, n_classes, cov, rng, between=1.0, within=0.05):
    """Class-structured data: class centres ~ N(0, between Phi), points ~ N(centre, within Phi).

    Classes are assigned round-robin so every class is present. Returns
    ``(data, labels)``.
    """
    if n_classes < 1 or n_classes > n:
        raise ConfigError(f"need 1 <= n_classes <= n, got {n_classes}")
    labels = np.arange(n) % n_classes
    centres = math.sqrt(between) * rng.standard_normal((n_classes, cov.d)) @ cov.chol.T
    noise = math.sqrt(within) * rng.standard_normal((n, cov.d)) @ cov.chol.T
    return centres[labels] + noise, labels
