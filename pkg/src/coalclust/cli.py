"""Command-line entry point: ``coalclust {generate,fit,eval,bench}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .baseline_hc import average_link
from .coalescent import Dendrogram
from .errors import CoalclustError, ConfigError, DataError
from .experiments import bench_experiment, machine_metadata, max_workers, parallel_map
from .kernels import KINDS, build_covariance, default_coords
from .metrics import evaluate, posterior_distance
from .samplers import SamplerConfig, fit_trees, run_alternating
from .seeding import REPLICATE, derive_seed
from .synthetic import PRESETS, SyntheticSpec, generate_replicate

log = logging.getLogger("coalclust")

KERNEL_ALIASES = {"se": "squared_exponential", "matern": "matern32_grid", "diag": "diagonal"}
WEIGHT_ALIASES = {"exact": "exact_bessel", "laplace": "laplace_limit"}


def replicate_name(seed, index):
    return f"seed{seed}_rep{index:03d}"


# generate


def cmd_generate(args):
    spec = _synthetic_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cov = spec.covariance()
    for i in range(spec.replicates):
        ds = generate_replicate(spec, i, cov)
        rep = out / replicate_name(spec.seed, i)
        rep.mkdir(exist_ok=True)
        io.write_matrix(rep / "data.csv", ds.data)
        io.write_tree(rep, "truth", ds.tree)
        io.write_json(rep / "theta.json", {"kernel": spec.kernel, "theta": _jsonable(ds.theta),
                                           "n": spec.n, "d": spec.d, "seed": spec.seed, "replicate": i})
    log.info("wrote %d replicate(s) to %s", spec.replicates, out)
    return 0


def _synthetic_spec(args):
    fields = {}
    if args.preset:
        fields.update(n=PRESETS[args.preset][0], d=PRESETS[args.preset][1], replicates=50)
    for name in ("n", "d", "replicates"):
        if getattr(args, name) is not None:
            fields[name] = getattr(args, name)
    if "n" not in fields or "d" not in fields:
        raise ConfigError("generate needs --preset or both --n and --d")
    kernel = _kernel_kind(args.kernel)
    theta = None
    if args.theta:
        theta = json.loads(args.theta)
    return SyntheticSpec(kernel=kernel, theta=theta, seed=args.seed, **fields)


def _jsonable(theta):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in theta.items()}


# fit


def _kernel_kind(name):
    kind = KERNEL_ALIASES.get(name, name)
    if kind not in KINDS:
        raise ConfigError(f"unknown kernel {name!r}")
    return kind


def _load_config(path):
    if not path:
        return {}
    obj = io.read_json(path)
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj


def _sampler_config(args, file_cfg):
    fields = dict(file_cfg.get("sampler", {}))
    pairs = {
        "algorithm": args.algorithm, "particles": args.particles, "window_factor": args.delta0,
        "resample_threshold": args.resample_threshold, "seed": args.seed,
    }
    fields.update({k: v for k, v in pairs.items() if v is not None})
    if args.weight_mode is not None:
        fields["weight_mode"] = WEIGHT_ALIASES.get(args.weight_mode, args.weight_mode)
    if args.exact_correction is not None:
        fields["exact_correction"] = args.exact_correction
    try:
        return SamplerConfig(**fields)
    except TypeError as exc:
        raise ConfigError(f"bad sampler option: {exc}") from exc


def _covariance(args, file_cfg, data_dir, d):
    """Kernel from flags / config file, theta from --theta, theta.json next to the data, or defaults."""
    kernel_cfg = dict(file_cfg.get("kernel", {}))
    kind = _kernel_kind(args.kernel or kernel_cfg.get("kind", "squared_exponential"))
    theta = kernel_cfg.get("theta")
    theta_path = Path(args.theta) if args.theta else data_dir / "theta.json"
    if theta is None and theta_path.exists():
        obj = io.read_json(theta_path)
        theta = obj.get("theta", obj)
        kind = _kernel_kind(args.kernel or obj.get("kernel", kind))
    coords = None
    coords_path = data_dir / "coords.json"
    if args.coords:
        coords = io.read_coords(args.coords)
    elif coords_path.exists():
        coords = io.read_coords(coords_path)
    if theta is None:
        theta = {"ell": d / 4.0, "sigma2": 1e-9} if kind == "squared_exponential" else None
    theta = dict(theta) if theta is not None else None
    if args.fix_sigma2 is not None and kind != "diagonal":
        theta = dict(theta or {})
        theta["sigma2"] = args.fix_sigma2
    if coords is None and kind != "diagonal":
        coords = default_coords(kind, d)
    cov = build_covariance(kind, theta, coords=coords, d=d)
    if cov.d != d:
        raise DataError(f"covariance is {cov.d}-dimensional but the data has {d} columns")
    return cov


def fit_directory(data_dir, out_dir, args, file_cfg, seed):
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    data = io.read_matrix(data_dir / "data.csv")
    cov = _covariance(args, file_cfg, data_dir, data.shape[1])
    cfg = None if args.algorithm == "hc" else _sampler_config(args, file_cfg).replace(seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trees").mkdir(exist_ok=True)

    iterations = args.iterations or 0
    pinned = ("sigma2",) if args.fix_sigma2 is not None else ()
    theta_trace = []
    if args.algorithm == "hc":
        start = time.perf_counter()
        tree = average_link(data)
        runtime = time.perf_counter() - start
        trees, weights, ess, log_evidence = [tree], np.ones(1), [], None
    else:
        if iterations > 0:
            burn_in = args.burn_in if args.burn_in is not None else 0
            alt = run_alternating(data, cov, cfg, iterations, burn_in, pinned=pinned)
            res = alt.final
            theta_trace = [_jsonable(th) for th in alt.theta_trace]
            runtime = alt.runtime_seconds
            cov = alt.cov
        else:
            res = fit_trees(data, cov, cfg)
            runtime = res.runtime_seconds
        trees, weights, ess = res.trees, res.weights, res.ess_trace.tolist()
        log_evidence = res.log_evidence if np.isfinite(res.log_evidence) else None

    width = len(str(len(trees) - 1))
    for j, tree in enumerate(trees):
        (out_dir / "trees" / f"particle{j:0{width}d}.newick").write_text(tree.to_newick() + "\n")
    io.write_json(out_dir / "trees.json", [t.to_dict() for t in trees])
    io.write_matrix(out_dir / "distance_matrix.csv", posterior_distance(trees, weights))
    result = {
        "algorithm": args.algorithm,
        "config": cfg.to_dict() if cfg is not None else {"seed": seed},
        "kernel": cov.kind,
        "theta": _jsonable(cov.theta),
        "theta_trace": theta_trace,
        "weights": [float(w) for w in weights],
        "best_index": int(np.argmax(weights)),
        "ess_trace": ess,
        "log_evidence": log_evidence,
        "runtime_seconds": runtime,
        "n": int(data.shape[0]),
        "d": int(data.shape[1]),
    }
    io.write_json(out_dir / "result.json", result)
    return str(out_dir)


def _replicate_dirs(root):
    root = Path(root)
    if (root / "data.csv").exists():
        return None
    reps = sorted(p for p in root.iterdir() if (p / "data.csv").exists())
    if not reps:
        raise DataError(f"{root}: no data.csv found (neither directly nor in replicate subdirectories)")
    return reps


def _fit_job(job):
    data_dir, out_dir, args, file_cfg, seed = job
    return fit_directory(data_dir, out_dir, args, file_cfg, seed)


def cmd_fit(args):
    if args.seed is None:
        raise ConfigError("fit needs --seed")
    file_cfg = _load_config(args.config)
    if args.algorithm is None:
        args.algorithm = file_cfg.get("sampler", {}).get("algorithm", "mpost2")
    if args.algorithm != "hc":
        _sampler_config(args, file_cfg)
    reps = _replicate_dirs(args.data)
    if reps is None:
        fit_directory(args.data, args.out, args, file_cfg, args.seed)
        return 0
    jobs = [(rep, Path(args.out) / rep.name, args, file_cfg, derive_seed(args.seed, REPLICATE, i))
            for i, rep in enumerate(reps)]
    parallel_map(_fit_job, jobs, max_workers(args.workers))
    return 0


# eval


def _load_fit(fit_dir):
    fit_dir = Path(fit_dir)
    result = io.read_json(fit_dir / "result.json")
    trees = [Dendrogram.from_dict(t) for t in io.read_json(fit_dir / "trees.json")]
    return result, trees


def _truth_tree(truth_dir):
    if truth_dir is None:
        return None
    truth_dir = Path(truth_dir)
    for name in ("truth.json", "truth.newick"):
        if (truth_dir / name).exists():
            return io.read_tree(truth_dir / name)
    raise DataError(f"{truth_dir}: no truth.json or truth.newick")


def eval_directory(fit_dir, truth_dir, labels_path, out_dir):
    result, trees = _load_fit(fit_dir)
    truth = _truth_tree(truth_dir)
    labels = io.read_labels(labels_path) if labels_path else None
    if truth is None and labels is None:
        raise ConfigError("eval needs --truth and/or --labels")
    report = evaluate(trees, result["weights"], truth, labels, result.get("runtime_seconds"))
    if result.get("algorithm") == "hc":
        # linkage heights are not coalescent times
        for key in ("mse_t", "mae_t", "mab_t", "mse_pi", "mae_pi", "mab_pi"):
            setattr(report, key, None)
        report.best = {}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_json(out_dir / "metrics.json", report.to_dict(include_runtime=False))
    if labels is not None:
        lines = ["n_clusters,ari"] + [f"{k},{a!r}" for k, a in report.ari_curve]
        (out_dir / "ari_curve.csv").write_text("\n".join(lines) + "\n")
    return report


SUMMARY_KEYS = ("mse_t", "mae_t", "mab_t", "mse_pi", "mae_pi", "mab_pi", "subtree_score", "auc")


def _mean_sd(values):
    vals = np.array([v for v in values if v is not None], dtype=float)
    if not vals.size:
        return None
    return {"mean": float(vals.mean()), "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0}


def cmd_eval(args):
    fit_root = Path(args.fit)
    if (fit_root / "result.json").exists():
        eval_directory(fit_root, args.truth, args.labels, args.out)
        return 0
    reps = sorted(p for p in fit_root.iterdir() if (p / "result.json").exists())
    if not reps:
        raise DataError(f"{fit_root}: no result.json found")
    reports = []
    for rep in reps:
        truth = Path(args.truth) / rep.name if args.truth else None
        labels = args.labels
        if labels is None and truth is not None and (truth / "labels.csv").exists():
            labels = truth / "labels.csv"
        reports.append(eval_directory(rep, truth, labels, Path(args.out) / rep.name))
    summary = {"replicates": len(reports)}
    for key in SUMMARY_KEYS:
        stats = _mean_sd(getattr(r, key) for r in reports)
        if stats is not None:
            summary[key] = stats
    io.write_json(Path(args.out) / "summary.json", summary)
    # wall time varies run to run, so it is kept out of summary.json
    timing = _mean_sd(r.runtime_seconds for r in reports)
    io.write_json(Path(args.out) / "timing.json", {"replicates": len(reports), "runtime_seconds": timing})
    return 0


# bench


def cmd_bench(args):
    if args.seed is None:
        raise ConfigError("bench needs --seed")
    sizes = tuple(int(x) for x in args.sizes.split(","))
    methods = tuple(args.methods.split(","))
    report = bench_experiment(sizes=sizes, d=args.d, particles=args.particles or 100, seed=args.seed,
                              methods=methods, postpost_cap=args.postpost_cap, repeats=args.repeats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "bench.json", report)
    for row in report["rows"]:
        print(f"{row['method']:>9} n={row['n']:<4} {row['runtime']:.3f}s")
    return 0


# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="coalclust", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthetic replicates with known trees")
    gen.add_argument("--preset", choices=sorted(PRESETS))
    gen.add_argument("--n", type=int)
    gen.add_argument("--d", type=int)
    gen.add_argument("--replicates", type=int)
    gen.add_argument("--kernel", default="squared_exponential")
    gen.add_argument("--theta", help="JSON object of kernel hyperparameters")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    fit = sub.add_parser("fit", help="sample trees for one dataset or a directory of replicates")
    fit.add_argument("--data", required=True, help="directory with data.csv, or a directory of them")
    fit.add_argument("--algorithm", choices=["mpost1", "mpost2", "postpost", "greedy", "mgreedy", "hc"])
    fit.add_argument("--particles", type=int)
    fit.add_argument("--iterations", type=int, help="alternate tree and theta updates this many times")
    fit.add_argument("--burn-in", type=int)
    fit.add_argument("--kernel")
    fit.add_argument("--theta", help="theta.json to use instead of the one next to data.csv")
    fit.add_argument("--coords", help="coords.json for the covariance")
    fit.add_argument("--fix-sigma2", type=float, help="pin sigma2 at this value")
    fit.add_argument("--delta0", type=float, help="merge-time window factor")
    fit.add_argument("--weight-mode", choices=["exact", "laplace"])
    fit.add_argument("--exact-correction", action=argparse.BooleanOptionalAction, default=None)
    fit.add_argument("--resample-threshold", type=float)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--config", help="JSON file with 'sampler' and 'kernel' sections")
    fit.add_argument("--workers", type=int)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("eval", help="score fits against truth trees and/or labels")
    ev.add_argument("--fit", required=True)
    ev.add_argument("--truth")
    ev.add_argument("--labels")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="runtime scaling over n")
    bench.add_argument("--sizes", default="16,32,64,128")
    bench.add_argument("--d", type=int, default=32)
    bench.add_argument("--methods", default="postpost,mpost1,mpost2,mgreedy")
    bench.add_argument("--particles", type=int, default=100)
    bench.add_argument("--postpost-cap", type=int, default=128)
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CoalclustError as exc:
        print(f"coalclust: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"coalclust: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
