"""Covariance hyperparameter updates and the alternating tree / theta sampler."""

from dataclasses import dataclass, field
import math
import time

import numpy as np
from scipy.special import logsumexp

from ..errors import CoalclustError, ConfigError, NumericalError
from ..kernels import build_covariance, free_parameters, get_param, set_param
from ..seeding import HYPER, ITERATION, derive_rng, derive_seed
from ..special_math import LOG_STEP_WIDTH, slice_sample
from ..tree_model import replay
from .greedy import greedy_result
from .smc import run_postpost, run_smc

# log-space bounds, flat prior inside
LOG_BOUNDS = {"ell": (-10.0, 10.0), "sigma2": (-25.0, 5.0), "variances": (-10.0, 10.0)}


def log_bounds(name):
    if name.startswith("ell"):
        return LOG_BOUNDS["ell"]
    if name.startswith("variances"):
        return LOG_BOUNDS["variances"]
    return LOG_BOUNDS[name]


def hyper_objective(data, tree, cov, literal_sum=False):
    """Sum of log Z_k over the tree's merges; ``literal_sum`` gives log(sum Z_k) instead."""
    logs = np.array([res.log_z for res in replay(data, tree, cov)])
    if literal_sum:
        return float(logsumexp(logs))
    return float(np.sum(logs))


def sample_hyperparams(data, tree, cov, rng, pinned=(), literal_sum=False, n_steps=1):
    """One coordinate-wise slice sweep over the free log-hyperparameters.

    Returns the updated CovarianceModel. A coordinate whose update hits a
    factorization or numerical error keeps its previous value.
    """
    unknown = set(pinned) - set(free_parameters(cov))
    if unknown:
        raise ConfigError(f"cannot pin unknown hyperparameters {sorted(unknown)}")
    for name in free_parameters(cov):
        if name in pinned:
            continue
        lo, hi = log_bounds(name)
        x0 = math.log(get_param(cov.theta, name))
        if not lo <= x0 <= hi:
            x0 = min(max(x0, lo), hi)
        current = cov

        def log_density(x, idx, name=name, current=current):
            out = np.empty(len(x))
            for i, val in enumerate(x):
                model = build_covariance(
                    current.kind, set_param(current.theta, name, math.exp(val)), current.coords
                )
                out[i] = hyper_objective(data, tree, model, literal_sum)
            return out

        try:
            x = slice_sample(log_density, [x0], LOG_STEP_WIDTH, lo, hi, rng, n_steps=n_steps)[0]
            cov = build_covariance(cov.kind, set_param(cov.theta, name, math.exp(x)), cov.coords)
        except (CoalclustError, ArithmeticError):
            cov = current
    return cov


def fit_trees(data, cov, config):
    """Dispatch one tree-sampling pass on ``config.algorithm``."""
    if config.algorithm in ("mpost1", "mpost2"):
        return run_smc(data, cov, config)
    if config.algorithm == "postpost":
        return run_postpost(data, cov, config)
    return greedy_result(data, cov, config)


@dataclass(eq=False)
class AlternatingResult:
    final: object
    retained: list
    theta_trace: list
    cov: object
    runtime_seconds: float = 0.0
    burn_in: int = 0
    n_iter: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def best_tree(self):
        return self.final.best_tree


def run_alternating(data, cov, config, n_iter, burn_in, pinned=(), literal_sum=False):
    """Alternate tree sampling and a theta sweep on the max-weight tree.

    Iteration ``i`` samples trees with seed ``derive_seed(config.seed, ITERATION, i)``
    and then updates theta; post-burn-in tree sets and theta draws are kept.
    """
    if n_iter < 1 or not 0 <= burn_in < n_iter:
        raise ConfigError(f"need n_iter > burn_in >= 0, got n_iter={n_iter}, burn_in={burn_in}")
    start = time.perf_counter()
    retained, trace = [], []
    result = None
    for it in range(n_iter):
        cfg = config.replace(seed=derive_seed(config.seed, ITERATION, it))
        result = fit_trees(data, cov, cfg)
        cov = sample_hyperparams(
            data, result.best_tree, cov, derive_rng(config.seed, HYPER, it), pinned, literal_sum
        )
        if it >= burn_in:
            retained.append(result)
            trace.append(dict(cov.theta))
    if result is None:
        raise NumericalError("no iterations were run")
    return AlternatingResult(
        final=result,
        retained=retained,
        theta_trace=trace,
        cov=cov,
        runtime_seconds=time.perf_counter() - start,
        burn_in=burn_in,
        n_iter=n_iter,
    )
