"""Independent reference computations used by the tests.

Everything here is deliberately slow and direct: adaptive quadrature,
brute-force enumeration, explicit inverses. Nothing here imports the
package under test; trees are only read through ``merges`` and
``node_times()``.
"""

import itertools
import math

import mpmath as mp
import numpy as np
from scipy import integrate


# Bessel K from its integral representation


def log_bessel_k_integral(nu, z, dps=25):
    """log of int_0^inf exp(-z cosh t) cosh(nu t) dt at ``dps`` digits.

    The integrand is cut where it has fallen 80 nats below its peak.
    """
    with mp.workdps(dps):
        nu, z = mp.mpf(nu), mp.mpf(z)
        # integrand exp(-z cosh t + nu t) peaks at sinh(t*) = nu / z
        t_star = mp.asinh(nu / z)

        def log_g(t):
            return -z * mp.cosh(t) + nu * t

        log_peak = log_g(t_star)
        step = mp.mpf(1) / 8
        t_end = t_star + step
        while log_g(t_end) - log_peak > -80:
            step *= 2
            t_end = t_star + step
        t_lo = mp.mpf(0)
        if t_star > 0:
            step = mp.mpf(1) / 8
            while t_star - step > 0 and log_g(t_star - step) - log_peak > -80:
                step *= 2
            t_lo = max(mp.mpf(0), t_star - step)

        def f(t):
            return mp.exp(log_g(t) - log_peak) * (1 + mp.exp(-2 * nu * t)) / 2

        pts = sorted({mp.mpf(0), t_lo, t_star, t_end})
        # the left remnant [0, t_lo] is below exp(-80) relative and is still included
        val = mp.quad(f, pts)
        return float(log_peak + mp.log(val))


# truncated GIG by quadrature


def _gig_log_kernel(v, order, chi, psi):
    return (order - 1.0) * math.log(v) - chi / (2.0 * v) - psi * v / 2.0


def _gig_breaks(order, chi, psi, lower):
    a = order - 1.0
    mode = (a + math.sqrt(a * a + chi * psi)) / psi if a >= 0 else chi / (math.sqrt(a * a + chi * psi) - a)
    start = max(mode, lower)
    shift = _gig_log_kernel(start, order, chi, psi)
    # local scale from the slope and curvature of the log kernel at the start point
    slope = a / start + chi / (2.0 * start**2) - psi / 2.0
    curv = a / start**2 + chi / start**3
    sd = 1.0 / max(abs(slope), math.sqrt(abs(curv)), 1e-12)
    hi = start
    while _gig_log_kernel(hi, order, chi, psi) - shift > -60:
        hi += sd
        sd *= 1.5
    pts = sorted({lower, start, hi})
    if mode > lower:
        pts.insert(1, max(lower, mode / 4))
    return sorted(set(pts)), shift


def truncated_gig_moments(order, chi, psi, lower):
    """Mean and variance of ``delta = (v - lower)/2`` for v ~ GIG truncated to (lower, inf)."""
    pts, shift = _gig_breaks(order, chi, psi, lower)

    def moment(k):
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            total += integrate.quad(
                lambda v: ((v - lower) / 2.0) ** k * math.exp(_gig_log_kernel(v, order, chi, psi) - shift),
                a, b, epsabs=0, epsrel=1e-12, limit=400,
            )[0]
        return total

    z = moment(0)
    mean = moment(1) / z
    second = moment(2) / z
    return mean, second - mean * mean


def truncated_gig_delta_cdf(order, chi, psi, lower):
    """Vectorizable CDF of delta on a fine grid, interpolated."""
    pts, shift = _gig_breaks(order, chi, psi, lower)
    grid = np.concatenate([np.linspace(a, b, 4001)[:-1] for a, b in zip(pts[:-1], pts[1:])] + [[pts[-1]]])
    dens = np.array([math.exp(_gig_log_kernel(v, order, chi, psi) - shift) if v > 0 else 0.0 for v in grid])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cum /= cum[-1]
    deltas = (grid - lower) / 2.0
    return lambda x: np.interp(x, deltas, cum)


# likelihood by integrating out latent nodes (d = 1, scalar phi)


def latent_marginal_likelihood(data, tree, phi=1.0, points_per_sd=12):
    """p(X | tree) with a flat prior on the root value, d = 1, by numerical integration.

    Internal node values are eliminated bottom-up on a uniform grid with the
    trapezoid rule; edges into leaves are evaluated exactly.
    """
    x = np.asarray(data, dtype=float).ravel()
    n = tree.n_leaves
    times = tree.node_times()
    kids = {n + k: (a, b) for k, (a, b, _) in enumerate(tree.merges)}
    internal_edges = [times[p] - times[c] for p, cs in kids.items() for c in cs if c >= n]
    sd_min = math.sqrt(phi * min(internal_edges)) if internal_edges else 1.0
    half = float(np.ptp(x)) + 12.0 * math.sqrt(phi * times[-1])
    h = sd_min / points_per_sd
    count = int(2 * half / h) + 1
    if count > 12000:
        raise ValueError(f"grid of {count} points needed; pick a tree with longer internal branches")
    z = float(x.mean()) + np.linspace(-half, half, count)
    h = z[1] - z[0]

    def log_normal(value, mean, var):
        return -0.5 * np.log(2 * np.pi * var) - (value - mean) ** 2 / (2 * var)

    log_g = {}
    for node in range(n, 2 * n - 1):
        total = np.zeros(count)
        for c in kids[node]:
            var = phi * (times[node] - times[c])
            if c < n:
                total += log_normal(x[c], z, var)
            else:
                top = log_g[c].max()
                kernel = np.exp(log_normal(z[None, :], z[:, None], var))
                total += np.log(kernel @ np.exp(log_g[c] - top) * h) + top
        log_g[node] = total
    root = log_g[2 * n - 2]
    top = root.max()
    return float(top + math.log(np.exp(root - top).sum() * h))


# pair weight as the marginal over the merge-time increment


def pair_weight_integral(child1, child2, t_prev, lam, cov, log_z_fn):
    """log of int_0^inf lam exp(-lam delta) Z_k(t_prev + delta) d delta.

    ``log_z_fn(child1, child2, t)`` returns log Z_k for a merge at ``t``.
    """
    def f(delta, shift=0.0):
        return lam * math.exp(-lam * delta + log_z_fn(child1, child2, t_prev + delta) - shift)

    grid = np.geomspace(1e-8, 1e3, 400)
    logs = [math.log(lam) - lam * g + log_z_fn(child1, child2, t_prev + g) for g in grid]
    shift = max(logs)
    peak = float(grid[int(np.argmax(logs))])
    pts = sorted({0.0, peak / 10, peak, 4 * peak + 1e-6, 20 * peak + 1e-3})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, a, b, args=(shift,), epsabs=0, epsrel=1e-12, limit=400)[0]
    total += integrate.quad(f, pts[-1], np.inf, args=(shift,), epsabs=0, epsrel=1e-12, limit=400)[0]
    return shift + math.log(total)


# clustering references


def average_link_bruteforce(data):
    """O(n^3) average linkage: recompute every cluster distance from scratch each stage."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    dist = np.sqrt(((data[:, None, :] - data[None, :, :]) ** 2).sum(-1))
    clusters = {i: [i] for i in range(n)}
    merges = []
    for k in range(n - 1):
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            dab = float(np.mean(dist[np.ix_(clusters[a], clusters[b])]))
            key = (dab, a, b)
            if best is None or key < best:
                best = key
        dab, a, b = best
        merges.append((a, b, dab))
        clusters[n + k] = clusters.pop(a) + clusters.pop(b)
    return merges


def ari_pair_count(p1, p2):
    """Adjusted Rand index by enumerating every pair of items."""
    p1, p2 = list(p1), list(p2)
    n = len(p1)
    pairs = list(itertools.combinations(range(n), 2))
    same1 = [p1[i] == p1[j] for i, j in pairs]
    same2 = [p2[i] == p2[j] for i, j in pairs]
    both = sum(a and b for a, b in zip(same1, same2))
    a, b, total = sum(same1), sum(same2), len(pairs)
    expected = a * b / total
    top = 0.5 * (a + b)
    if top == expected:
        return 1.0 if both == top else 0.0
    return (both - expected) / (top - expected)


def gaussian_merge_log_z(mean1, s1, t1, mean2, s2, t2, t, phi):
    """log N(mean1 - mean2 | 0, v Phi) with v the summed branch-plus-message variances."""
    diff = np.asarray(mean1, dtype=float) - np.asarray(mean2, dtype=float)
    v = (t - t1 + s1) + (t - t2 + s2)
    cov = v * np.asarray(phi, dtype=float)
    sign, logdet = np.linalg.slogdet(2 * math.pi * cov)
    return -0.5 * logdet - 0.5 * diff @ np.linalg.solve(cov, diff)
