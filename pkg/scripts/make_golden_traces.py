"""Regenerate (or verify) the frozen single-leaf traces in tests/fixtures.

    python scripts/make_golden_traces.py          # verify
    python scripts/make_golden_traces.py --write  # overwrite
"""
import argparse
import json
import sys
from pathlib import Path

from atsmc.engine import DEFAULT_SEED, simulate_trace, trace_seed
from atsmc.parser import parse_model
from atsmc.translate import translate_tree

PATH = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden_traces.json"
MODEL = "tree Single { root L leaf L rate=0.01 }"
HORIZON = 1000.0


def build() -> dict:
    nsta = translate_tree(parse_model(MODEL))
    traces = {}
    for i in range(3):
        seed = trace_seed(DEFAULT_SEED, i)
        tr = simulate_trace(nsta, seed, HORIZON, nsta.resolve("L", "Disrupt"))
        traces[str(i)] = {"trace_seed": seed, "trace": json.loads(tr.to_json())}
    return {"model": MODEL, "master_seed": DEFAULT_SEED, "horizon": HORIZON, "traces": traces}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    doc = build()
    if args.write:
        PATH.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {PATH}")
        return
    same = json.loads(PATH.read_text()) == doc
    print("fixtures match" if same else "fixtures differ")
    sys.exit(0 if same else 1)


if __name__ == "__main__":
    main()
