"""Log-domain Bessel K, generalized inverse Gaussian (GIG) helpers and slice sampling.

The GIG density used throughout is

    GIG(x | order, chi, psi) ∝ x**(order - 1) * exp(-chi / (2 x) - psi x / 2),   x > 0

optionally truncated to ``x > lower_bound``. Merge-time draws live in the
variable ``v = 2 * delta + lower_bound``, so the sampler returns ``delta``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError, SamplerFailure

# log K switches to the Hankel expansion for z above this multiple of max(1, order)
ASYMPTOTIC_SWITCH = 50.0
# guards lower_bound = 0 when sizing the merge-time search window
WINDOW_FLOOR = 1e-8
MAX_SHRINK = 64
# log-delta step-out width when the local curvature gives no scale; one e-fold
LOG_STEP_WIDTH = 1.0
# per-chain widths are this many local standard deviations, kept inside WIDTH_RANGE
WIDTH_SDS = 2.5
WIDTH_RANGE = (0.02, 4.0)
# smallest delta the sampler will return
DELTA_MIN = 1e-300
DEFAULT_SLICE_STEPS = 8
# truncated-integral panels stop once the integrand has fallen this many nats
TAIL_DROP = 50.0
TAIL_DROP_MAX = 90.0
# a left piece whose peak sits this far below the mode is dropped (< 1e-300 relative)
LEFT_CUTOFF = 700.0
TAIL_ORDER = 48
_gl_x, _gl_w = np.polynomial.legendre.leggauss(TAIL_ORDER)
_GL_NODES = (_gl_x + 1.0) / 2.0
_GL_WEIGHTS = _gl_w / 2.0


def _as_scalar(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


def _log_k_hankel(nu, z):
    """Hankel large-argument expansion, summed until terms drop below 1e-17."""
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 80):
        new = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        grew = np.abs(new) > np.abs(term)
        active &= ~grew
        term = np.where(active, new, 0.0)
        total = total + term
        active &= np.abs(term) > 1e-17 * np.abs(total)
        if not active.any():
            break
    return 0.5 * np.log(np.pi / (2.0 * z)) - z + np.log(total)


def _log_k_small_z(nu, z):
    """Leading finite series for K when the direct evaluation overflows."""
    out = np.empty_like(z)
    for i, (n_, z_) in enumerate(zip(nu.ravel(), z.ravel())):
        if n_ == 0.0:
            out.flat[i] = math.log(-math.log(z_ / 2.0) - np.euler_gamma)
            continue
        q = -z_ * z_ / 4.0
        c, s = 1.0, 1.0
        k = 0
        while k + 1 < n_:
            c *= q / ((n_ - k - 1.0) * (k + 1.0))
            s += c
            k += 1
            if abs(c) < 1e-17 * abs(s):
                break
        out.flat[i] = math.log(0.5) + special.gammaln(n_) + n_ * math.log(2.0 / z_) + math.log(s)
    return out


def log_bessel_k(order, z):
    """log K_|order|(z), elementwise.

    Uses the exponentially scaled Amos routine in the bulk, the Hankel series
    for ``z > 50 * max(1, |order|)`` and a small-argument series where the
    scaled value overflows.
    """
    nu = np.abs(np.asarray(order, dtype=float))
    zz = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(nu)):
        raise DomainError("Bessel order must be finite")
    # K is even in the order with O(order^2) curvature; Amos returns nan for subnormal orders
    nu = np.where(nu < 1e-150, 0.0, nu)
    if not np.all(zz > 0) or not np.all(np.isfinite(zz)):
        raise DomainError("Bessel argument must be positive and finite")
    nu_b, z_b = np.broadcast_arrays(nu, zz)
    out = np.empty(nu_b.shape)
    big = z_b > ASYMPTOTIC_SWITCH * np.maximum(1.0, nu_b)
    if big.any():
        out[big] = _log_k_hankel(nu_b[big], z_b[big])
    mid = ~big
    if mid.any():
        nm, zm = nu_b[mid], z_b[mid]
        with np.errstate(all="ignore"):
            val = np.log(special.kve(nm, zm)) - zm
        bad = ~np.isfinite(val)
        if bad.any():
            val[bad] = _log_k_small_z(nm[bad], zm[bad])
        out[mid] = val
    return _as_scalar(out, order, z)


@dataclass(frozen=True)
class GigParams:
    """Parameters of a (possibly truncated) GIG law over ``v``."""

    order: float
    chi: float
    psi: float
    lower_bound: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.order):
            raise DomainError(f"GIG order must be finite, got {self.order}")
        if not (self.chi > 0 and self.psi > 0):
            raise DomainError(f"GIG needs chi > 0 and psi > 0, got {self.chi}, {self.psi}")
        if not (self.lower_bound >= 0 and math.isfinite(self.lower_bound)):
            raise DomainError(f"GIG lower bound must be >= 0, got {self.lower_bound}")


def gig_log_kernel(v, order, chi, psi):
    """Unnormalized log density (x^(order-1) exp(-chi/2x - psi x/2))."""
    v = np.asarray(v, dtype=float)
    return (order - 1.0) * np.log(v) - chi / (2.0 * v) - psi * v / 2.0


def gig_log_normalizer(order, chi, psi):
    """log of the integral of the kernel over (0, inf): log[2 K(sqrt(chi psi)) (chi/psi)^(order/2)]."""
    chi = np.asarray(chi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return (
        math.log(2.0)
        + log_bessel_k(order, np.sqrt(chi * psi))
        + 0.5 * np.asarray(order) * (np.log(chi) - np.log(psi))
    )


def gig_mode(order, chi, psi):
    """Mode of the untruncated GIG, in a cancellation-free form."""
    a = np.asarray(order, dtype=float) - 1.0
    root = np.sqrt(a * a + chi * psi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a < 0, chi / (root - a), (a + root) / psi)


def gig_log_mode(order, chi, psi):
    """Mode of the GIG viewed as a density over log(v)."""
    a = np.asarray(order, dtype=float)
    root = np.sqrt(a * a + chi * psi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a < 0, chi / (root - a), (a + root) / psi)


def gig_mean(order, chi, psi):
    omega = np.sqrt(chi * psi)
    return np.sqrt(chi / psi) * np.exp(
        log_bessel_k(np.asarray(order) + 1.0, omega) - log_bessel_k(order, omega)
    )


def _log_kernel_u(u, order, chi, psi):
    """Kernel over u = log v, Jacobian included: order*u - chi e^-u / 2 - psi e^u / 2."""
    with np.errstate(over="ignore", invalid="ignore"):
        ev = np.exp(u)
        out = order * u - chi / (2.0 * ev) - psi * ev / 2.0
    return np.where(np.isnan(out), -np.inf, out)


def _log_panel(a, direction, order, chi, psi):
    """log of the kernel integral from ``u = a`` outwards (``direction`` = +1 or -1).

    The log kernel is concave in u, so once it is decreasing away from ``a``
    the integrand is a monotone bump. The panel is cut where it has fallen
    TAIL_DROP nats below its value at ``a`` (at most TAIL_DROP_MAX) and
    integrated with fixed-order Gauss-Legendre.
    """
    ha = _log_kernel_u(a, order, chi, psi)
    ev = np.exp(a)
    slope = np.abs(order + chi / (2.0 * ev) - psi * ev / 2.0)
    curv = chi / (2.0 * ev) + psi * ev / 2.0

    def drop(y):
        return ha - _log_kernel_u(a + direction * y, order, chi, psi)

    # first guess from the local quadratic, then bracket and bisect
    hi = 2.0 * TAIL_DROP / (slope + np.sqrt(slope * slope + 2.0 * curv * TAIL_DROP))
    lo = np.zeros_like(hi)
    for _ in range(200):
        short = drop(hi) < TAIL_DROP
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(60):
        long = drop(hi) > TAIL_DROP_MAX
        if not long.any():
            break
        mid = 0.5 * (lo + hi)
        mid_short = drop(mid) < TAIL_DROP
        lo = np.where(long & mid_short, mid, lo)
        hi = np.where(long & ~mid_short, mid, hi)
    y = hi[..., None] * _GL_NODES
    h = _log_kernel_u(a[..., None] + direction * y, order, chi[..., None], psi[..., None])
    rel = np.exp(h - ha[..., None])
    return ha + np.log(np.sum(rel * _GL_WEIGHTS, axis=-1) * hi)


def gig_log_integral_above(order, chi, psi, lower):
    """log of the GIG kernel integral over (lower, inf), vectorized.

    Uses the closed-form normalizer, minus the piece below ``lower`` when
    that piece matters, or direct quadrature when ``lower`` is above the
    log-space mode (no Bessel evaluation needed then).
    """
    shape = np.broadcast_shapes(np.shape(chi), np.shape(psi), np.shape(lower))
    chi, psi, lower = (np.broadcast_to(np.asarray(x, dtype=float), shape).ravel() for x in (chi, psi, lower))
    order = float(order)
    out = np.empty(chi.shape)
    u_star = np.log(gig_log_mode(order, chi, psi))
    with np.errstate(divide="ignore"):
        a = np.log(lower)
    above = (lower > 0) & (a > u_star)
    if above.any():
        out[above] = _log_panel(a[above], 1.0, order, chi[above], psi[above])
    rest = ~above
    if rest.any():
        full = gig_log_normalizer(order, chi[rest], psi[rest])
        out[rest] = full
        below = (lower[rest] > 0)
        # the left piece is below exp(-TAIL_DROP) of the peak when h(a) is that far down
        if below.any():
            idx = np.flatnonzero(rest)[below]
            h_a = _log_kernel_u(a[idx], order, chi[idx], psi[idx])
            h_star = _log_kernel_u(u_star[idx], order, chi[idx], psi[idx])
            keep = h_a > h_star - LEFT_CUTOFF
            if keep.any():
                j = idx[keep]
                left = _log_panel(a[j], -1.0, order, chi[j], psi[j])
                out[j] = out[j] + np.log1p(-np.exp(np.minimum(left - out[j], 0.0)))
    return out.reshape(shape)[()]


def gig_log_tail_mass(params):
    """log P(V > lower_bound) under the untruncated GIG."""
    if params.lower_bound <= 0:
        return 0.0
    full = float(gig_log_normalizer(params.order, params.chi, params.psi))
    part = float(gig_log_integral_above(params.order, params.chi, params.psi, params.lower_bound))
    return min(0.0, part - full)


def gig_log_density(params, v):
    """Log density of the truncated GIG at ``v``; ``-inf`` outside (lower_bound, inf)."""
    v = float(v)
    if not v > params.lower_bound or v <= 0:
        return -math.inf
    return float(
        gig_log_kernel(v, params.order, params.chi, params.psi)
        - gig_log_normalizer(params.order, params.chi, params.psi)
        - gig_log_tail_mass(params)
    )


def slice_sample(log_density, x0, width, lower, upper, rng, n_steps=1, max_shrink=MAX_SHRINK):
    """Step-out / shrinkage slice sampler on a batch of independent 1-D chains.

    ``log_density(x, idx)`` evaluates chain ``idx`` (an index array) at ``x``.
    ``lower`` and ``upper`` are hard bounds (may be infinite). Returns the
    state after ``n_steps`` updates of every chain.
    """
    x = np.array(x0, dtype=float, ndmin=1)
    size = x.shape[0]
    width = np.broadcast_to(np.asarray(width, dtype=float), (size,))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (size,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (size,))
    everyone = np.arange(size)
    fx = log_density(x, everyone)
    for _ in range(n_steps):
        y = fx + np.log1p(-rng.random(size))
        left = x - width * rng.random(size)
        right = np.minimum(left + width, upper)
        left = np.maximum(left, lower)

        for edge, step, bound in ((left, -1.0, lower), (right, 1.0, upper)):
            idx = everyone[(edge != bound)]
            idx = idx[log_density(edge[idx], idx) > y[idx]]
            while idx.size:
                edge[idx] = np.minimum(np.maximum(edge[idx] + step * width[idx], lower[idx]), upper[idx])
                idx = idx[edge[idx] != bound[idx]]
                if idx.size:
                    idx = idx[log_density(edge[idx], idx) > y[idx]]

        pending = everyone
        for _ in range(max_shrink):
            prop = left[pending] + rng.random(pending.size) * (right[pending] - left[pending])
            fp = log_density(prop, pending)
            ok = fp > y[pending]
            x[pending[ok]] = prop[ok]
            fx[pending[ok]] = fp[ok]
            pending, prop = pending[~ok], prop[~ok]
            if not pending.size:
                break
            below = prop < x[pending]
            left[pending[below]] = prop[below]
            right[pending[~below]] = prop[~below]
        else:
            raise SamplerFailure(
                f"slice shrinkage failed for {pending.size} chain(s) after {max_shrink} steps"
            )
    return x


def merge_time_window(order, chi, psi, lower_bound, window_factor):
    """Upper limit on delta for the merge-time slice sampler.

    ``window_factor`` times the larger of the truncation point and the
    untruncated GIG mean bounds ``v``; the mean term keeps the window sensible
    when ``lower_bound`` is zero or tiny.
    """
    scale = np.maximum(np.maximum(lower_bound, gig_mean(order, chi, psi)), WINDOW_FLOOR)
    return window_factor * scale / 2.0


def gig_slice_sample_batch(order, chi, psi, lower_bound, rng, window_factor=100.0,
                           n_steps=DEFAULT_SLICE_STEPS):
    """Draw ``delta = (v - lower_bound)/2`` for a batch of truncated GIG laws.

    The chain runs on log(delta) inside (DELTA_MIN, window) starting from the
    mode of the log-space density, and the final state of ``n_steps`` updates
    is returned.
    """
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    psi = np.broadcast_to(np.asarray(psi, dtype=float), chi.shape)
    low = np.broadcast_to(np.asarray(lower_bound, dtype=float), chi.shape)
    if np.any(chi <= 0) or np.any(psi <= 0) or np.any(low < 0):
        raise DomainError("invalid GIG parameters for slice sampling")
    order = float(order)

    dmax = merge_time_window(order, chi, psi, low, window_factor)

    size = chi.shape[0]

    def log_density(u, idx):
        if idx.size == size:
            c, p, lo = chi, psi, low
        else:
            c, p, lo = chi[idx], psi[idx], low[idx]
        v = 2.0 * np.exp(u) + lo
        return (order - 1.0) * np.log(v) - c / (2.0 * v) - p * v / 2.0 + u

    # start near the log-space mode
    v_star = gig_log_mode(order, chi, psi)
    with np.errstate(divide="ignore"):
        slope = (order - 1.0) / np.maximum(low, DELTA_MIN) + chi / (2.0 * np.maximum(low, DELTA_MIN) ** 2) - psi / 2.0
    fallback = np.where(slope < 0, 1.0 / (2.0 * np.abs(slope)), dmax / 10.0)
    start = np.where(v_star > low * (1.0 + 1e-9), (v_star - low) / 2.0, fallback)
    start = np.clip(start, DELTA_MIN * 10, dmax * (1 - 1e-12))

    # width from the curvature of the log-delta density at the start point
    w = 2.0 * start
    v = w + low
    a = order - 1.0
    # a floored chi with a zero bound can underflow v; those widths fall back below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        grad = a / v + chi / (2.0 * v * v) - psi / 2.0
        curv = (-a / v**2 - chi / v**3) * w * w + grad * w
        width = np.where(curv < 0, WIDTH_SDS / np.sqrt(-curv), LOG_STEP_WIDTH)
    width = np.clip(np.nan_to_num(width, nan=LOG_STEP_WIDTH), *WIDTH_RANGE)

    u = slice_sample(
        log_density,
        np.log(start),
        width,
        math.log(DELTA_MIN),
        np.log(dmax),
        rng,
        n_steps=n_steps,
    )
    return np.exp(u)


def gig_slice_sample(params, rng, window_factor=100.0, n_steps=DEFAULT_SLICE_STEPS):
    """One merge-time increment ``delta`` with ``2 delta + lower_bound`` ~ truncated GIG."""
    out = gig_slice_sample_batch(
        params.order, params.chi, params.psi, params.lower_bound, rng, window_factor, n_steps
    )
    return float(out[0])
