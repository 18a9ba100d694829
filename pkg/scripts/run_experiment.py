"""Run one replicate experiment and write its rows and summary as JSON.

    python scripts/run_experiment.py structure --replicates 50 --out results/structure.json
    python scripts/run_experiment.py greedy --n 128 --d 128
    python scripts/run_experiment.py hyper --workers 4
    python scripts/run_experiment.py labeled
    python scripts/run_experiment.py fidelity
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from coalclust.experiments import (
    fidelity_experiment,
    greedy_experiment,
    hyper_experiment,
    labeled_experiment,
    machine_metadata,
    structure_experiment,
    summarize,
)

SUMMARY_KEYS = {
    "structure": ("runtime", "mse_t", "mae_t", "mab_t"),
    "greedy": ("mse_t", "mae_t", "mab_t"),
    "hyper": ("abs_error", "sq_error", "ell_estimate", "runtime"),
    "labeled": ("auc", "subtree", "runtime"),
}


def run(args):
    if args.experiment == "structure":
        return structure_experiment(n=args.n, d=args.d, replicates=args.replicates, particles=args.particles,
                                    seed=args.seed, methods=tuple(args.methods.split(",")), workers=args.workers)
    if args.experiment == "greedy":
        return greedy_experiment(n=args.n, d=args.d, replicates=args.replicates, seed=args.seed, workers=args.workers)
    if args.experiment == "hyper":
        return hyper_experiment(n=args.n, d=args.d, replicates=args.replicates, particles=args.particles,
                                seed=args.seed, workers=args.workers)
    if args.experiment == "labeled":
        return labeled_experiment(replicates=args.replicates, seed=args.seed, workers=args.workers)
    return fidelity_experiment(n_states=args.replicates, n=args.n, d=args.d, seed=args.seed)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=["structure", "greedy", "hyper", "labeled", "fidelity"])
    parser.add_argument("--n", type=int, default=32)
    parser.add_argument("--d", type=int, default=32)
    parser.add_argument("--replicates", type=int, help="replicates (states for fidelity)")
    parser.add_argument("--particles", type=int, default=100)
    parser.add_argument("--methods", default="postpost,mpost1,mpost2,greedy,mgreedy")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="JSON output path")
    args = parser.parse_args(argv)
    if args.replicates is None:
        args.replicates = {"labeled": 25, "fidelity": 200}.get(args.experiment, 50)
    if args.experiment == "hyper" and args.particles == 100:
        args.particles = 50

    start = time.perf_counter()
    rows = run(args)
    wall = time.perf_counter() - start

    if args.experiment == "fidelity":
        summary = {"spearman_min": min(r["spearman"] for r in rows),
                   "spearman_mean": float(np.mean([r["spearman"] for r in rows])),
                   "argmax_agreement": float(np.mean([r["argmax_agree"] for r in rows]))}
    else:
        summary = {key: summarize(rows, key) for key in SUMMARY_KEYS[args.experiment]}
    report = {"experiment": args.experiment, "args": vars(args), "wall_seconds": wall,
              "machine": machine_metadata(), "summary": summary, "rows": rows}
    print(json.dumps(summary, indent=2))
    print(f"wall time {wall:.1f}s", file=sys.stderr)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main()
