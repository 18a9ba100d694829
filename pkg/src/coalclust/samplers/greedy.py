"""Greedy tree construction: merge the pair whose posterior-mode time comes first."""

import time

import numpy as np

from ..errors import ConfigError
from .smc import ParticleSet, SMCResult
from .weights import greedy_delta_corrected, greedy_delta_original, greedy_delta_textbook

VARIANTS = ("corrected", "original", "textbook")

_FORMULAS = {
    "corrected": greedy_delta_corrected,
    "original": greedy_delta_original,
    "textbook": greedy_delta_textbook,
}


def run_greedy(data, cov, variant="corrected"):
    """Deterministic dendrogram; each stage merges the argmin-delta pair at ``t_prev + max(0, delta)``.

    Ties go to the smallest (left, right) node-id pair.
    """
    if variant not in _FORMULAS:
        raise ConfigError(f"greedy variant must be one of {VARIANTS}, got {variant!r}")
    formula = _FORMULAS[variant]
    ps = ParticleSet(data, cov, 1)
    if ps.n < 2:
        raise ConfigError("greedy needs at least two observations")
    while not ps.done:
        lam = ps.rate()
        delta = formula(ps.eps[0], ps.pair_r()[0], lam, ps.d)
        lo = np.minimum(ps.left[0], ps.right[0])
        hi = np.maximum(ps.left[0], ps.right[0])
        best = np.lexsort((hi, lo, delta))[0]
        ps.merge(np.array([best]), np.array([max(0.0, float(delta[best]))]))
    return ps.tree(0)


def greedy_result(data, cov, config):
    """Wrap a greedy run as a one-particle :class:`SMCResult`.

    ``greedy`` uses the original formula, ``mgreedy`` the corrected one
    (or the textbook mode when ``config.greedy_form == "textbook"``).
    """
    start = time.perf_counter()
    if config.algorithm == "greedy":
        variant = "original"
    elif config.algorithm == "mgreedy":
        variant = "textbook" if config.greedy_form == "textbook" else "corrected"
    else:
        raise ConfigError(f"not a greedy algorithm: {config.algorithm!r}")
    tree = run_greedy(data, cov, variant)
    return SMCResult(
        trees=[tree],
        log_weights=np.zeros(1),
        ess_trace=np.ones(max(tree.n_leaves - 1, 0)),
        log_evidence=float("nan"),
        n_resamples=0,
        runtime_seconds=time.perf_counter() - start,
        config=config,
        theta=dict(cov.theta),
    )
