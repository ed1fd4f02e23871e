"""Run every scenario analysis and principle comparison on the bundled models.

    python scripts/run_experiment.py --out results/ [--eps 0.02] [--workers 4] [--oracle-only]
"""
import argparse
import json

from atsmc.engine import default_seed
from atsmc.experiment import experiment_paper


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--eps", type=float, default=0.02)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--cold", type=float, default=0.002)
    ap.add_argument("--oracle-only", action="store_true")
    args = ap.parse_args()

    methods = ("oracle",) if args.oracle_only else ("oracle", "smc")
    seed = default_seed() if args.seed is None else args.seed
    summary = experiment_paper(args.out, args.eps, args.alpha, seed, args.workers, args.cold, methods)
    keys = [k for k in sorted(summary) if k.endswith(("top4", "argmax", "principles"))]
    print(json.dumps({k: summary[k] for k in keys}, indent=2))
    print(f"wall time {summary['wall_time_s']} s, files in {args.out}")


if __name__ == "__main__":
    main()
