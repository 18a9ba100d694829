"""Covariance models over the d observation dimensions.

Three kinds are supported:

* ``squared_exponential``: ``exp(-d_ij**2 / (2 ell)) + sigma2 * [i == j]`` on 1-D
  positions. ``ell`` divides the squared distance directly (it is *not* squared).
* ``matern32_grid``: separable Matérn 3/2 on a 2-D pixel grid with
  ``ell_x``, ``ell_y`` and additive noise ``sigma2``.
* ``diagonal``: ``diag(variances)``.

Each model carries a Cholesky factor; quadratic forms and log determinants
are computed from it and ``Phi^{-1}`` is never formed.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg

from .errors import ConfigError, DataError, NonPSDError

KINDS = ("squared_exponential", "matern32_grid", "diagonal")
JITTER_STEPS = (0.0, 1e-10, 1e-6)
SQRT3 = math.sqrt(3.0)

DEFAULT_THETA = {
    "squared_exponential": {"ell": 1.0, "sigma2": 1e-9},
    "matern32_grid": {"ell_x": 1.0, "ell_y": 1.0, "sigma2": 1e-9},
    "diagonal": {},
}


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    kind: str
    theta: dict
    coords: np.ndarray | None
    phi: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def d(self):
        return self.phi.shape[0]

    def quad_form(self, delta):
        return quad_form(self, delta)

    def log_det(self):
        return log_det(self)

    def whiten(self, delta):
        """Solve ``L w = delta`` row-wise for ``delta`` of shape (..., d)."""
        delta = np.asarray(delta, dtype=float)
        if delta.shape[-1] != self.d:
            raise DataError(f"expected vectors of length {self.d}, got {delta.shape[-1]}")
        flat = delta.reshape(-1, self.d)
        # a single right-hand side takes a different LAPACK path whose rounding
        # differs from the multi-column solve; pad so every vector is whitened alike
        rhs = np.vstack([flat, flat]) if flat.shape[0] == 1 else flat
        w = linalg.solve_triangular(self.chol, rhs.T, lower=True, check_finite=False)
        return w.T[: flat.shape[0]].reshape(delta.shape)

    def with_theta(self, **updates):
        theta = dict(self.theta)
        theta.update(updates)
        return build_covariance(self.kind, theta, self.coords)


def default_coords(kind, d):
    if kind == "squared_exponential":
        return np.arange(d, dtype=float)
    if kind == "matern32_grid":
        side = int(round(math.sqrt(d)))
        if side * side != d:
            raise ConfigError(f"matern32_grid needs grid coordinates for d={d}")
        return grid_coords(side, side)
    return None


def grid_coords(height, width):
    """Row-major (x, y) pixel positions, one row per dimension."""
    ys, xs = np.divmod(np.arange(height * width), width)
    return np.column_stack([xs, ys]).astype(float)


def _check_theta(kind, theta):
    def positive(name):
        val = theta.get(name)
        if val is None or not (val > 0) or not math.isfinite(val):
            raise ConfigError(f"{kind}: {name} must be positive and finite, got {val}")

    if kind == "squared_exponential":
        positive("ell")
    elif kind == "matern32_grid":
        positive("ell_x")
        positive("ell_y")
    if kind != "diagonal" and not (theta.get("sigma2", 0.0) >= 0):
        raise ConfigError(f"{kind}: sigma2 must be >= 0")


def _assemble(kind, theta, coords, d):
    if kind == "squared_exponential":
        pos = np.asarray(coords, dtype=float).reshape(-1)
        dist2 = (pos[:, None] - pos[None, :]) ** 2
        return np.exp(-dist2 / (2.0 * theta["ell"])) + theta.get("sigma2", 0.0) * np.eye(pos.size)
    if kind == "matern32_grid":
        xy = np.asarray(coords, dtype=float)
        ax = SQRT3 * np.abs(xy[:, None, 0] - xy[None, :, 0]) / theta["ell_x"]
        ay = SQRT3 * np.abs(xy[:, None, 1] - xy[None, :, 1]) / theta["ell_y"]
        return (1.0 + ax) * (1.0 + ay) * np.exp(-ax - ay) + theta.get("sigma2", 0.0) * np.eye(len(xy))
    if kind == "diagonal":
        var = np.asarray(theta.get("variances", np.ones(d)), dtype=float)
        if var.shape != (d,) or np.any(var <= 0):
            raise ConfigError("diagonal covariance needs d strictly positive variances")
        return np.diag(var)
    raise ConfigError(f"unknown covariance kind {kind!r}; expected one of {KINDS}")


def build_covariance(kind, theta=None, coords=None, d=None):
    """Assemble Phi for ``kind`` and factorize it.

    ``d`` is only needed when neither ``coords`` nor ``theta`` fixes the
    dimension (e.g. a default diagonal or default 1-D positions).
    """
    theta = dict(DEFAULT_THETA.get(kind, {}) if theta is None else theta)
    if kind not in KINDS:
        raise ConfigError(f"unknown covariance kind {kind!r}; expected one of {KINDS}")
    _check_theta(kind, theta)
    if kind == "diagonal" and "variances" in theta:
        theta["variances"] = tuple(float(v) for v in theta["variances"])
        d = len(theta["variances"]) if d is None else d
    if coords is None and kind != "diagonal":
        if d is None:
            raise ConfigError("need coords or d to build a covariance")
        coords = default_coords(kind, d)
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        coords.setflags(write=False)
        d = coords.shape[0]
    phi = _assemble(kind, theta, coords, d)
    phi.setflags(write=False)

    scale = np.trace(phi) / phi.shape[0]
    for step in JITTER_STEPS:
        jitter = step * scale
        try:
            chol = np.linalg.cholesky(phi + jitter * np.eye(phi.shape[0]) if jitter else phi)
        except np.linalg.LinAlgError:
            continue
        chol.setflags(write=False)
        return CovarianceModel(kind, theta, coords, phi, chol, jitter)
    raise NonPSDError(f"{kind} covariance not positive definite even with jitter {jitter:g}")


def quad_form(model, delta):
    """``delta Phi^{-1} delta^T`` for vectors stacked on the last axis."""
    w = model.whiten(delta)
    return np.sum(w * w, axis=-1)


def log_det(model):
    return 2.0 * float(np.sum(np.log(np.diag(model.chol))))


def free_parameters(model):
    """Names of hyperparameters that a sampler may move."""
    if model.kind == "squared_exponential":
        return ["ell", "sigma2"]
    if model.kind == "matern32_grid":
        return ["ell_x", "ell_y", "sigma2"]
    return [f"variances.{i}" for i in range(model.d)]


def get_param(theta, name):
    if name.startswith("variances."):
        return theta["variances"][int(name.split(".")[1])]
    return theta[name]


def set_param(theta, name, value):
    out = dict(theta)
    if name.startswith("variances."):
        var = list(out["variances"])
        var[int(name.split(".")[1])] = float(value)
        out["variances"] = tuple(var)
    else:
        out[name] = float(value)
    return out
