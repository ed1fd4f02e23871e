"""Empirical coverage of the SMC interval against the oracle.

For a handful of random trees and many master seeds, count how often the
estimate lands within epsilon of the analytic value. With alpha=0.05 the
fraction should be at least 0.95.

    python scripts/smc_convergence.py [--trees 5] [--seeds 40] [--eps 0.05]
"""
import argparse
import random
import sys
from pathlib import Path

from atsmc.engine import SmcSettings, estimate_many
from atsmc.oracle import top_curve
from atsmc.translate import translate_tree

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from helpers import random_tree  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()

    rnd = random.Random(0)
    times = [60.0, 120.0, 180.0]
    for k in range(args.trees):
        tree = random_tree(rnd, 8)
        exact = [p for _, p in top_curve(tree, times)]
        nsta = translate_tree(tree)
        inside = total = 0
        for seed in range(args.seeds):
            ests = estimate_many(nsta, tree.top_event, "Disrupt", times, SmcSettings(args.eps, args.alpha, seed))
            for e, p in zip(ests, exact):
                inside += abs(e.p_hat - p) <= args.eps
                total += 1
        print(f"tree {k} ({len(tree.nodes)} nodes): {inside}/{total} = {inside / total:.3f} within eps")


if __name__ == "__main__":
    main()
