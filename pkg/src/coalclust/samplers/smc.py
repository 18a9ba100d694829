"""Sequential Monte Carlo over coalescent trees.

All particles advance in lock step, one merge per stage, so their state is
kept as stacked arrays:

* node tables ``means (M, 2n-1, d)``, ``var`` and ``ctime`` (creation time);
* the active node ids ``active (M, n-k)``;
* the candidate-pair table: ``left``, ``right``, cached ``eps``,
  ``const_part = t_l + t_r - s_l - s_r`` and the lambda-free ``core`` term.

Every particle has the same number of candidates at a stage, so removing the
pairs touched by a merge is a boolean mask followed by a reshape.
"""

from dataclasses import dataclass, field, asdict
import math
import time

import numpy as np
from scipy.special import logsumexp

from ..coalescent import Dendrogram, coalescent_rate
from ..errors import ConfigError, DataError, NumericalError
from ..seeding import STAGE, derive_rng
from ..special_math import DEFAULT_SLICE_STEPS, gig_slice_sample_batch
from ..tree_model import LOG_2PI, VARIANCE_FLOOR, NodeMessage
from .weights import (
    EPS_FLOOR,
    fast_log_core,
    gig_order,
    pair_log_weight_exact,
    pair_log_weight_fast,
    pair_log_weight_laplace,
    truncation_log_mass,
)

ALGORITHMS = ("mpost1", "mpost2", "postpost", "greedy", "mgreedy")
WEIGHT_MODES = ("exact_bessel", "laplace_limit")
GREEDY_FORMS = ("printed", "textbook")


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: str = "mpost2"
    particles: int = 100
    resample_threshold: float = 0.5
    window_factor: float = 100.0
    weight_mode: str = "exact_bessel"
    seed: int = 0
    exact_correction: bool = True
    # add log P(v > r) to the exact weight so it normalizes the truncated law
    truncated_normalizer: bool = True
    slice_steps: int = DEFAULT_SLICE_STEPS
    greedy_form: str = "printed"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if int(self.particles) != self.particles or self.particles < 1:
            raise ConfigError(f"particles must be a positive integer, got {self.particles}")
        if not 0.0 <= self.resample_threshold <= 1.0:
            raise ConfigError(f"resample_threshold must lie in [0, 1], got {self.resample_threshold}")
        if not (self.window_factor > 0 and math.isfinite(self.window_factor)):
            raise ConfigError(f"window_factor must be positive, got {self.window_factor}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if self.slice_steps < 1:
            raise ConfigError("slice_steps must be >= 1")
        if self.greedy_form not in GREEDY_FORMS:
            raise ConfigError(f"greedy_form must be one of {GREEDY_FORMS}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")

    def replace(self, **changes):
        fields = asdict(self)
        fields.update(changes)
        return SamplerConfig(**fields)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Particle:
    """Read-only view of one particle of a :class:`ParticleSet`."""

    merges: tuple
    active: dict
    pairs: np.ndarray
    log_weight: float


def _check_data(data, cov):
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DataError("data must be a non-empty (n, d) array")
    if data.shape[1] != cov.d:
        raise DataError(f"data has {data.shape[1]} columns but the covariance is {cov.d}x{cov.d}")
    if not np.all(np.isfinite(data)):
        raise DataError("data contains NaN or inf")
    return data


class ParticleSet:
    """Stacked state of ``M`` partial trees at a common stage.

    ``cache_pairs=False`` keeps no per-pair cache: ``eps`` and ``const_part``
    are recomputed from the node tables whenever they are requested.
    ``core_mode`` (a weight mode) additionally caches the lambda-free core.
    """

    def __init__(self, data, cov, n_particles, cache_pairs=True, core_mode=None):
        data = _check_data(data, cov)
        n, d = data.shape
        m = int(n_particles)
        self.n, self.d, self.cov = n, d, cov
        self.cache_pairs = cache_pairs
        self.core_mode = core_mode
        self.means = np.zeros((m, 2 * n - 1, d))
        self.means[:, :n] = data
        self.var = np.zeros((m, 2 * n - 1))
        self.ctime = np.zeros((m, 2 * n - 1))
        self.active = np.tile(np.arange(n), (m, 1))
        left, right = np.triu_indices(n, 1)
        self.left = np.tile(left, (m, 1))
        self.right = np.tile(right, (m, 1))
        if cache_pairs:
            eps0 = cov.quad_form(data[left] - data[right]) if left.size else np.zeros(0)
            self.eps = np.tile(eps0, (m, 1))
            self.const_part = np.zeros((m, left.size))
            self.core = np.tile(fast_log_core(eps0, d, core_mode), (m, 1)) if core_mode else None
        self.merges = np.zeros((m, n - 1, 2), dtype=np.int64)
        self.times = np.zeros((m, n - 1))
        self.t_prev = np.zeros(m)
        self.log_weight = np.zeros(m)
        self.stage = 0

    @property
    def size(self):
        return self.log_weight.shape[0]

    @property
    def n_active(self):
        return self.n - self.stage

    @property
    def done(self):
        return self.stage >= self.n - 1

    def rate(self):
        return coalescent_rate(self.n, self.stage + 1)

    def pair_eps(self):
        if self.cache_pairs:
            return self.eps
        out = np.empty(self.left.shape)
        for j in range(self.size):
            out[j] = self.cov.quad_form(self.means[j, self.left[j]] - self.means[j, self.right[j]])
        return out

    def pair_const(self):
        if self.cache_pairs:
            return self.const_part
        rows = np.arange(self.size)[:, None]
        l, r = self.left, self.right
        return self.ctime[rows, l] + self.ctime[rows, r] - self.var[rows, l] - self.var[rows, r]

    def pair_r(self, const_part=None):
        const_part = self.pair_const() if const_part is None else const_part
        return np.maximum(2.0 * self.t_prev[:, None] - const_part, 0.0)

    def merge(self, choice, delta):
        """Merge pair ``choice[j]`` of particle ``j`` after an increment ``delta[j]``."""
        if self.done:
            raise NumericalError("no merges left")
        m, n, k = self.size, self.n, self.stage
        rows = np.arange(m)
        new = n + k
        a = self.left[rows, choice]
        b = self.right[rows, choice]
        t_new = self.t_prev + np.asarray(delta, dtype=float)

        st1 = np.maximum(t_new - self.ctime[rows, a] + self.var[rows, a], VARIANCE_FLOOR)
        st2 = np.maximum(t_new - self.ctime[rows, b] + self.var[rows, b], VARIANCE_FLOOR)
        s = 1.0 / (1.0 / st1 + 1.0 / st2)
        self.means[:, new] = s[:, None] * (
            self.means[rows, a] / st1[:, None] + self.means[rows, b] / st2[:, None]
        )
        self.var[:, new] = s
        self.ctime[:, new] = t_new
        self.merges[:, k, 0] = np.minimum(a, b)
        self.merges[:, k, 1] = np.maximum(a, b)
        self.times[:, k] = t_new

        keep = (self.active != a[:, None]) & (self.active != b[:, None])
        survivors = self.active[keep].reshape(m, -1)
        self.active = np.concatenate([survivors, np.full((m, 1), new)], axis=1)

        keep = (
            (self.left != a[:, None]) & (self.left != b[:, None])
            & (self.right != a[:, None]) & (self.right != b[:, None])
        )
        width = survivors.shape[1]
        self.left = np.concatenate([self.left[keep].reshape(m, -1), survivors], axis=1)
        self.right = np.concatenate([self.right[keep].reshape(m, -1), np.full((m, width), new)], axis=1)
        if self.cache_pairs:
            r2 = rows[:, None]
            const_new = self.ctime[r2, survivors] + t_new[:, None] - self.var[r2, survivors] - s[:, None]
            if width:
                eps_new = self.cov.quad_form(self.means[r2, survivors] - self.means[:, new][:, None, :])
            else:
                eps_new = np.zeros((m, 0))
            self.eps = np.concatenate([self.eps[keep].reshape(m, -1), eps_new], axis=1)
            self.const_part = np.concatenate([self.const_part[keep].reshape(m, -1), const_new], axis=1)
            if self.core is not None:
                core_new = fast_log_core(eps_new, self.d, self.core_mode)
                self.core = np.concatenate([self.core[keep].reshape(m, -1), core_new], axis=1)
        self.t_prev = t_new
        self.stage += 1

    def take(self, indices):
        """Keep particles ``indices`` (with repeats), as after resampling."""
        indices = np.asarray(indices)
        names = ["means", "var", "ctime", "active", "left", "right", "merges", "times",
                 "t_prev", "log_weight"]
        if self.cache_pairs:
            names += ["eps", "const_part"] + (["core"] if self.core is not None else [])
        for name in names:
            setattr(self, name, getattr(self, name)[indices])

    def tree(self, j):
        merges = tuple(
            (int(a), int(b), float(t)) for (a, b), t in zip(self.merges[j, :self.stage], self.times[j, :self.stage])
        )
        return Dendrogram(self.n, merges)

    def trees(self):
        return [self.tree(j) for j in range(self.size)]

    def particle(self, j):
        active = {
            int(node): NodeMessage(self.means[j, node].copy(), float(self.var[j, node]),
                                   float(self.ctime[j, node]), frozenset())
            for node in self.active[j]
        }
        pairs = np.column_stack([self.left[j], self.right[j]])
        merges = self.tree(j).merges
        return Particle(merges, active, pairs, float(self.log_weight[j]))


def effective_sample_size(log_weight):
    log_weight = np.asarray(log_weight, dtype=float)
    return float(np.exp(2.0 * logsumexp(log_weight) - logsumexp(2.0 * log_weight)))


def systematic_resample(weights, rng):
    """Ancestor indices from one uniform offset; ``weights`` need not be normalized."""
    weights = np.asarray(weights, dtype=float)
    m = weights.size
    cum = np.cumsum(weights / weights.sum())
    positions = (rng.random() + np.arange(m)) / m
    return np.minimum(np.searchsorted(cum, positions, side="right"), m - 1)


def _draw_pairs(log_w, rng):
    """One categorical draw per row of a log-weight matrix."""
    lse = logsumexp(log_w, axis=1)
    cum = np.cumsum(np.exp(log_w - lse[:, None]), axis=1)
    u = rng.random(log_w.shape[0]) * cum[:, -1]
    choice = np.sum(cum <= u[:, None], axis=1)
    return np.minimum(choice, log_w.shape[1] - 1), lse


def stage_log_weights(particles, config, eps=None, r=None):
    """Pair log-weights of every particle at the current stage (shape (M, P))."""
    lam = particles.rate()
    d = particles.d
    if config.algorithm == "mpost2":
        return pair_log_weight_fast(particles.core, particles.pair_const(), particles.t_prev[:, None], lam)
    eps = particles.pair_eps() if eps is None else eps
    r = particles.pair_r() if r is None else r
    if config.weight_mode == "laplace_limit":
        return pair_log_weight_laplace(eps, r, lam, d)
    return pair_log_weight_exact(eps, r, lam, d, truncated=config.truncated_normalizer)


def smc_step(particles, config, rng):
    """Advance every particle by one merge; returns the per-particle log increments."""
    if particles.done:
        raise NumericalError("all particles are complete")
    lam = particles.rate()
    d = particles.d
    # without a pair cache these are full recomputations, so do them once
    eps_all = particles.pair_eps()
    r_all = particles.pair_r()
    log_w = stage_log_weights(particles, config, eps_all, r_all)
    choice, lse = _draw_pairs(log_w, rng)
    rows = np.arange(particles.size)
    eps = eps_all[rows, choice]
    r = r_all[rows, choice]
    delta = gig_slice_sample_batch(
        gig_order(d), np.maximum(eps, EPS_FLOOR), lam, r, rng,
        window_factor=config.window_factor, n_steps=config.slice_steps,
    )
    increment = lse - 0.5 * d * LOG_2PI - 0.5 * particles.cov.log_det()
    if config.algorithm == "mpost2" and config.exact_correction:
        exact = pair_log_weight_exact(eps, r, lam, d, truncated=config.truncated_normalizer)
        increment = increment + exact - log_w[rows, choice]
    if not np.all(np.isfinite(increment)):
        raise NumericalError(f"non-finite weight increment at stage {particles.stage + 1}")
    particles.log_weight = particles.log_weight + increment
    particles.merge(choice, delta)
    return increment


@dataclass(eq=False)
class SMCResult:
    trees: list
    log_weights: np.ndarray
    ess_trace: np.ndarray
    log_evidence: float
    n_resamples: int
    runtime_seconds: float
    config: SamplerConfig
    theta: dict = field(default_factory=dict)

    @property
    def weights(self):
        w = np.exp(self.log_weights - logsumexp(self.log_weights))
        return w / w.sum()

    @property
    def best_index(self):
        # ties go to the lowest index
        return int(np.argmax(self.log_weights))

    @property
    def best_tree(self):
        return self.trees[self.best_index]


def _run(data, cov, config, cache_pairs):
    start = time.perf_counter()
    core_mode = config.weight_mode if config.algorithm == "mpost2" else None
    particles = ParticleSet(data, cov, config.particles, cache_pairs=cache_pairs, core_mode=core_mode)
    m = particles.size
    ess_trace = []
    n_resamples = 0
    while not particles.done:
        rng = derive_rng(config.seed, STAGE, particles.stage + 1)
        smc_step(particles, config, rng)
        ess = effective_sample_size(particles.log_weight)
        ess_trace.append(ess)
        if m > 1 and ess < config.resample_threshold * m and not particles.done:
            total = logsumexp(particles.log_weight)
            idx = systematic_resample(np.exp(particles.log_weight - total), rng)
            particles.take(idx)
            particles.log_weight = np.full(m, total - math.log(m))
            n_resamples += 1
    log_evidence = float(logsumexp(particles.log_weight) - math.log(m))
    return SMCResult(
        trees=particles.trees(),
        log_weights=particles.log_weight.copy(),
        ess_trace=np.asarray(ess_trace, dtype=float),
        log_evidence=log_evidence,
        n_resamples=n_resamples,
        runtime_seconds=time.perf_counter() - start,
        config=config,
        theta=dict(cov.theta),
    )


def run_smc(data, cov, config):
    """MPost1 (exact weights) or MPost2 (cached lambda-free weights)."""
    if config.algorithm not in ("mpost1", "mpost2"):
        raise ConfigError(f"run_smc handles mpost1/mpost2, not {config.algorithm!r}")
    return _run(data, cov, config, cache_pairs=True)


def run_postpost(data, cov, config):
    """Reference sampler: exact weights with eps and r recomputed for every pair each stage."""
    if config.algorithm not in ("postpost", "mpost1"):
        raise ConfigError(f"run_postpost cannot run {config.algorithm!r}")
    return _run(data, cov, config.replace(algorithm="postpost"), cache_pairs=False)
