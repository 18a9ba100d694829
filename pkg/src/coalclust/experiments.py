"""Replicate-level experiment drivers.

Each driver returns plain rows (one dict per replicate and method) so the
caller can aggregate, print or serialize them. Replicates are independent
and are mapped over a process pool when ``workers > 1``; every random draw
comes from seeds derived from the master seed, so the worker count never
changes the output.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math
import os
import platform
import time

import numpy as np
from scipy import stats

from .baseline_hc import average_link
from .coalescent import sample_prior
from .kernels import build_covariance
from .metrics import ari_curve_auc, error_triple, posterior_times, subtree_score
from .samplers import SamplerConfig, fit_trees, run_alternating, run_greedy
from .samplers.smc import ParticleSet, smc_step
from .samplers.weights import fast_log_core, pair_log_weight_exact
from .seeding import PRIOR_TREE, REPLICATE, derive_rng, derive_seed
from .synthetic import SyntheticSpec, generate_replicate, labeled_mixture

WORKERS_ENV = "COALCLUST_MAX_WORKERS"


def max_workers(requested=None):
    """Worker count: explicit request, else the environment cap, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


def parallel_map(func, items, workers=1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def machine_metadata():
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "numpy": np.__version__,
    }


def summarize(rows, key, group="method"):
    """Mean and sample standard deviation of ``key`` per group."""
    out = {}
    for name in sorted({r[group] for r in rows}):
        vals = np.array([r[key] for r in rows if r[group] == name and r.get(key) is not None], dtype=float)
        out[name] = {
            "mean": float(vals.mean()) if vals.size else float("nan"),
            "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            "count": int(vals.size),
        }
    return out


# structure learning with known covariance


@dataclass(frozen=True)
class StructureTask:
    spec: SyntheticSpec
    replicate: int
    methods: tuple
    particles: int


def _structure_one(task):
    ds = generate_replicate(task.spec, task.replicate)
    rows = []
    for method in task.methods:
        cfg = SamplerConfig(algorithm=method, particles=task.particles, seed=derive_seed(task.spec.seed, REPLICATE, task.replicate))
        res = fit_trees(ds.data, ds.cov, cfg)
        mse, mae, mab = error_triple(posterior_times(res.trees, res.weights), ds.tree.times)
        rows.append({
            "replicate": task.replicate, "method": method, "runtime": res.runtime_seconds,
            "mse_t": mse, "mae_t": mae, "mab_t": mab,
        })
    return rows


def structure_experiment(n=32, d=32, replicates=50, particles=100, seed=0,
                         methods=("postpost", "mpost1", "mpost2", "greedy", "mgreedy"), workers=1):
    spec = SyntheticSpec(n=n, d=d, seed=seed, replicates=replicates)
    tasks = [StructureTask(spec, i, tuple(methods), particles) for i in range(replicates)]
    return [row for rows in parallel_map(_structure_one, tasks, workers) for row in rows]


# pair-weight fidelity of the lambda-free approximation


def fidelity_experiment(n_states=200, n=32, d=32, seed=0):
    """Spearman correlation and argmax agreement of exact vs fast weights over random stage states.

    A state is a D1-style replicate advanced by exact SMC (one particle) to
    a uniformly chosen stage with at least three active nodes.
    """
    spec = SyntheticSpec(n=n, d=d, seed=seed, replicates=n_states)
    cov = spec.covariance()
    cfg = SamplerConfig(algorithm="mpost1", particles=1, seed=seed)
    rows = []
    for i in range(n_states):
        ds = generate_replicate(spec, i, cov)
        rng = derive_rng(seed, REPLICATE, i, 1)
        stage = int(rng.integers(0, n - 2))
        ps = ParticleSet(ds.data, cov, 1, core_mode="exact_bessel")
        for _ in range(stage):
            smc_step(ps, cfg, rng)
        lam = ps.rate()
        r = ps.pair_r()[0]
        exact = pair_log_weight_exact(ps.eps[0], r, lam, d)
        fast = ps.core[0] + 0.5 * lam * r
        rho = stats.spearmanr(exact, fast).statistic
        rows.append({
            "state": i, "stage": stage + 1, "pairs": exact.size,
            "spearman": float(rho), "argmax_agree": bool(np.argmax(exact) == np.argmax(fast)),
        })
    return rows


# greedy variants


@dataclass(frozen=True)
class GreedyTask:
    spec: SyntheticSpec
    replicate: int


def _greedy_one(task):
    ds = generate_replicate(task.spec, task.replicate)
    rows = []
    for variant in ("corrected", "original"):
        start = time.perf_counter()
        tree = run_greedy(ds.data, ds.cov, variant)
        elapsed = time.perf_counter() - start
        mse, mae, mab = error_triple(tree.times, ds.tree.times)
        rows.append({"replicate": task.replicate, "method": variant, "runtime": elapsed,
                     "mse_t": mse, "mae_t": mae, "mab_t": mab})
    return rows


def greedy_experiment(n=32, d=32, replicates=50, seed=0, workers=1):
    spec = SyntheticSpec(n=n, d=d, seed=seed, replicates=replicates)
    tasks = [GreedyTask(spec, i) for i in range(replicates)]
    return [row for rows in parallel_map(_greedy_one, tasks, workers) for row in rows]


# covariance learning


@dataclass(frozen=True)
class HyperTask:
    spec: SyntheticSpec
    replicate: int
    method: str
    particles: int
    n_iter: int
    burn_in: int
    ell_init: float


def _hyper_one(task):
    ds = generate_replicate(task.spec, task.replicate)
    theta0 = dict(task.spec.theta, ell=task.ell_init)
    cov0 = build_covariance(task.spec.kernel, theta0, d=task.spec.d)
    cfg = SamplerConfig(algorithm=task.method, particles=task.particles, seed=derive_seed(task.spec.seed, REPLICATE, task.replicate))
    res = run_alternating(ds.data, cov0, cfg, task.n_iter, task.burn_in, pinned=("sigma2",))
    trace = np.array([th["ell"] for th in res.theta_trace])
    ell_true = task.spec.theta["ell"]
    estimate = float(trace.mean())
    return [{
        "replicate": task.replicate, "method": task.method, "runtime": res.runtime_seconds,
        "ell_true": ell_true, "ell_estimate": estimate, "abs_error": abs(estimate - ell_true),
        "sq_error": (estimate - ell_true) ** 2,
    }]


def hyper_experiment(n=32, d=32, replicates=50, particles=50, n_iter=50, burn_in=10, seed=0,
                     method="mpost2", ell_init=None, workers=1):
    """Learn ell with sigma2 pinned; the chain starts at ``ell_init`` (default: twice the truth)."""
    spec = SyntheticSpec(n=n, d=d, seed=seed, replicates=replicates)
    init = 2.0 * spec.theta["ell"] if ell_init is None else ell_init
    tasks = [HyperTask(spec, i, method, particles, n_iter, burn_in, init) for i in range(replicates)]
    return [row for rows in parallel_map(_hyper_one, tasks, workers) for row in rows]


# labelled mixtures


@dataclass(frozen=True)
class LabeledTask:
    replicate: int
    seed: int
    n: int
    classes: int
    d: int
    particles: int
    between: float
    within: float


def _labeled_one(task):
    cov = build_covariance("squared_exponential", {"ell": task.d / 4.0, "sigma2": 1e-3}, d=task.d)
    rng = derive_rng(task.seed, REPLICATE, task.replicate)
    data, labels = labeled_mixture(task.n, task.classes, cov, rng, task.between, task.within)
    cfg = SamplerConfig(algorithm="mpost2", particles=task.particles, seed=derive_seed(task.seed, REPLICATE, task.replicate))
    res = fit_trees(data, cov, cfg)
    fitted = res.best_tree
    prior = sample_prior(task.n, derive_rng(task.seed, PRIOR_TREE, task.replicate))
    hc = average_link(data)
    rows = []
    for method, tree, runtime in (("mpost2", fitted, res.runtime_seconds), ("prior", prior, 0.0),
                                  ("hc", hc, 0.0)):
        _, auc = ari_curve_auc(tree, labels)
        rows.append({"replicate": task.replicate, "method": method, "runtime": runtime,
                     "auc": auc, "subtree": subtree_score(tree, labels)})
    return rows


def labeled_experiment(replicates=25, n=100, classes=10, d=16, particles=50, between=1.0,
                       within=0.05, seed=0, workers=1):
    tasks = [LabeledTask(i, seed, n, classes, d, particles, between, within) for i in range(replicates)]
    return [row for rows in parallel_map(_labeled_one, tasks, workers) for row in rows]


# cost scaling


def bench_experiment(sizes=(16, 32, 64, 128), d=32, particles=100, seed=0,
                     methods=("postpost", "mpost1", "mpost2", "mgreedy"), postpost_cap=128, repeats=1):
    """Wall time per method and size, plus log-log slopes of per-stage time against n."""
    rows = []
    for n in sizes:
        spec = SyntheticSpec(n=n, d=d, seed=seed)
        ds = generate_replicate(spec, 0)
        for method in methods:
            if method == "postpost" and n > postpost_cap:
                continue
            times = []
            for rep in range(repeats):
                cfg = SamplerConfig(algorithm=method, particles=particles, seed=seed + rep)
                times.append(fit_trees(ds.data, ds.cov, cfg).runtime_seconds)
            runtime = float(np.median(times))
            rows.append({"method": method, "n": n, "d": d, "runtime": runtime,
                         "per_stage": runtime / (n - 1)})
    slopes = {}
    for method in methods:
        pts = [(r["n"], r["per_stage"]) for r in rows if r["method"] == method]
        if len(pts) >= 2:
            x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slopes[method] = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "per_stage_slope": slopes, "machine": machine_metadata(), "seed": seed,
            "particles": particles, "sizes": list(sizes), "postpost_cap": postpost_cap}


def fraction(values):
    values = list(values)
    return sum(bool(v) for v in values) / len(values) if values else math.nan
