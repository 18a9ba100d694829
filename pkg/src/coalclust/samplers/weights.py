"""Per-pair merge weights and greedy merge-time formulas.

With ``lam`` the current coalescent rate, ``nu = 1 - d/2``, ``eps`` the
Mahalanobis separation of the two candidate messages and ``r`` the offset
that makes ``v = 2 delta + r`` the GIG variable, the exact pair weight is

    (lam/2) r - log 2 + log int_r^inf v^(nu-1) exp(-eps/(2v) - lam v/2) dv.

The lower limit ``r`` comes from ``delta >= 0``. Dropping it gives the closed
Bessel form

    log K_nu(sqrt(lam eps)) - (nu/2)(log lam - log eps) + (lam/2) r,

which is what ``truncated=False`` returns. All functions broadcast over
numpy arrays.
"""

import math

import numpy as np

from ..special_math import gig_log_integral_above, gig_log_normalizer, log_bessel_k

EPS_FLOOR = 1e-300
LOG2 = math.log(2.0)


def gig_order(d):
    return 1.0 - d / 2.0


def _floored(eps):
    return np.maximum(np.asarray(eps, dtype=float), EPS_FLOOR)


def truncation_log_mass(eps, r, lam, d):
    """log P(v > r) for each pair; zero where r = 0."""
    eps = _floored(eps)
    nu = gig_order(d)
    full = gig_log_normalizer(nu, eps, lam)
    return np.minimum(gig_log_integral_above(nu, eps, lam, r) - full, 0.0)


def pair_log_weight_exact(eps, r, lam, d, truncated=True):
    """Per-pair marginal weight, the integral over delta >= 0 of exp(-lam delta) Z_k.

    With ``truncated=False`` the GIG integral runs over all v > 0 instead of
    v > r, which is the closed Bessel form without the tail correction.
    """
    eps = _floored(eps)
    nu = gig_order(d)
    r = np.asarray(r, dtype=float)
    if truncated:
        return 0.5 * lam * r - LOG2 + gig_log_integral_above(nu, eps, lam, r)
    return (
        log_bessel_k(nu, np.sqrt(lam * eps))
        - 0.5 * nu * (np.log(lam) - np.log(eps))
        + 0.5 * lam * r
    )


def pair_log_weight_laplace(eps, r, lam, d):
    """Large-argument form: -(d-1)/4 log eps - sqrt(lam eps) + (lam/2) r."""
    eps = _floored(eps)
    return -0.25 * (d - 1) * np.log(eps) - np.sqrt(lam * eps) + 0.5 * lam * np.asarray(r, dtype=float)


def laplace_offset(lam, d):
    """Pair-independent difference between the exact weight's asymptote and the Laplace form."""
    nu = gig_order(d)
    return 0.5 * np.log(np.pi / 2.0) - 0.25 * np.log(lam) - 0.5 * nu * np.log(lam)


def fast_log_core(eps, d, weight_mode="exact_bessel"):
    """The rate-free part of the fast weight, computed once per pair."""
    eps = _floored(eps)
    if weight_mode == "laplace_limit":
        return -0.25 * (d - 1) * np.log(eps) - np.sqrt(eps)
    nu = gig_order(d)
    return log_bessel_k(nu, np.sqrt(eps)) + 0.5 * nu * np.log(eps)


def pair_log_weight_fast(core, const_part, t_prev, lam):
    """Cached core plus the rate term; ``r = 2 t_prev - const_part``.

    ``t_prev`` must already broadcast against ``const_part``.
    """
    r = np.maximum(2.0 * np.asarray(t_prev) - const_part, 0.0)
    return core + 0.5 * lam * r


def _mode_term(a, eps, lam):
    """(a + sqrt(a^2 + lam eps)) / (2 lam), written to avoid cancellation when a < 0."""
    a = np.asarray(a, dtype=float)
    eps = np.asarray(eps, dtype=float)
    root = np.sqrt(a * a + lam * eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = eps / (2.0 * (root - a))
    return np.where(a < 0, np.where(eps > 0, neg, 0.0), (a + root) / (2.0 * lam))


def greedy_delta_corrected(eps, r, lam, d):
    """Merge-time increment at the posterior mode, using order 1 - d/2."""
    return _mode_term(gig_order(d), eps, lam) - 0.5 * np.asarray(r, dtype=float)


def greedy_delta_textbook(eps, r, lam, d):
    """Same but with the textbook GIG mode (order - 1 = -d/2)."""
    return _mode_term(gig_order(d) - 1.0, eps, lam) - 0.5 * np.asarray(r, dtype=float)


def greedy_delta_original(eps, r, lam, d):
    """(-d + sqrt(d^2 + 2 lam eps)) / (2 lam) - r/2, cancellation-free."""
    eps = np.asarray(eps, dtype=float)
    core = eps / (np.sqrt(d * d + 2.0 * lam * eps) + d)
    return core - 0.5 * np.asarray(r, dtype=float)
