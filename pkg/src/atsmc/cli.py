"""``atsmc`` command line.

Exit codes: 0 ok, 1 validation failure, 2 parse error, 3 threshold verdict
Above, 4 usage error. A FILE argument of ``@security`` or ``@privacy`` names a
bundled model.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import engine
from .engine import QueryError, SmcSettings, check_threshold, estimate, parse_query
from .experiment import analyze, compare_rows, curve_rows, experiment_paper, rows_to_csv
from .model import ScenarioSpec, TreeError, apply_scenario, enumerate_scenarios, validate_tree
from .oracle import DEFAULT_STEP, OracleError
from .parser import ModelParseError, parse_model, parse_scenarios, serialize_model
from .principles import TransformError, apply_plan, parse_plan
from .shipped import MODEL_NAMES, read_text
from .sta import dump_nsta, validate_nsta
from .translate import translate_tree

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_ABOVE, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read(path: str) -> str:
    if path.startswith("@") and path[1:] in MODEL_NAMES:
        return read_text(f"{path[1:]}.adt")
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _load(path: str):
    return parse_model(_read(path))


def _times(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad time list {text!r}") from None
    if any(v < 0 for v in vals):
        raise UsageError("times must be >= 0")
    return vals


def _settings(args) -> SmcSettings:
    seed = engine.default_seed() if args.seed is None else args.seed
    try:
        return SmcSettings(args.eps, args.alpha, seed, args.workers)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    try:
        tree = parse_model(_read(args.file))
    except ModelParseError as e:
        for err in e.errors:
            print(f"{args.file}:{err}", file=sys.stderr)
        return EXIT_INVALID
    problems = validate_tree(tree)
    for p in problems:
        print(f"{args.file}: {p}", file=sys.stderr)
    if problems:
        return EXIT_INVALID
    print(f"ok: {tree.name} ({len(tree.nodes)} nodes, {len(tree.leaves())} leaves, top {tree.top_event})")
    return EXIT_OK


def cmd_translate(args) -> int:
    nsta = translate_tree(_load(args.file))
    problems = validate_nsta(nsta)
    if args.dump:
        sys.stdout.write(dump_nsta(nsta))
    else:
        print(f"{len(nsta.automata)} automata, {len(nsta.channels)} channels")
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    return EXIT_INVALID if problems else EXIT_OK


def _scenario_tree(args, tree):
    if args.hot is None:
        return tree
    hot = [h for h in args.hot.split(",") if h]
    return apply_scenario(tree, ScenarioSpec("cli", frozenset(hot), args.cold))


def cmd_check(args) -> int:
    tree = _scenario_tree(args, _load(args.file))
    nsta = translate_tree(tree)
    try:
        query = parse_query(args.query, nsta)
    except QueryError as e:
        raise UsageError(str(e)) from None
    est = estimate(nsta, query, _settings(args))
    print(est.to_json())
    if args.threshold is not None:
        verdict = check_threshold(est, args.threshold)
        print(f"verdict: {verdict.value} (threshold {args.threshold:g})")
        if verdict.value == "Above":
            return EXIT_ABOVE
    return EXIT_OK


def cmd_oracle(args) -> int:
    tree = _load(args.file)
    rows = curve_rows(tree, args.node or tree.top_event, _times(args.times), "oracle",
                      node=args.node, step=args.step)
    text = "t,probability\n" + "".join(f"{r.time_s!r},{r.probability!r}\n" for r in rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    tree = _load(args.file)
    cold = 0.002 if args.cold is None else args.cold
    if args.mode == "individual":
        scenarios = enumerate_scenarios(tree, "individual", cold, args.prefix)
    else:
        if not args.pairs:
            raise UsageError("--mode combo needs --pairs FILE")
        scenarios = parse_scenarios(_read(args.pairs), tree)
        if args.cold is not None:
            scenarios = [ScenarioSpec(s.name, s.hot, cold) for s in scenarios]
    settings = _settings(args) if args.method == "smc" else None
    rows = analyze(tree, scenarios, _times(args.times), args.method, settings, args.step)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_transform(args) -> int:
    tree = _load(args.file)
    report: list[str] = []
    after = apply_plan(tree, parse_plan(_read(args.plan)), report)
    fmt = "json" if args.out.endswith(".json") else "dsl"
    Path(args.out).write_text(serialize_model(after, fmt), encoding="utf-8")
    for i, line in enumerate(report):
        print(f"step {i}: {line}")
    return EXIT_OK


def cmd_compare(args) -> int:
    before, after = _load(args.base), _load(args.after)
    node = args.node
    if node is not None:
        for t in (before, after):
            if node not in t.nodes:
                raise UsageError(f"node {node!r} missing from one of the models")
    settings = _settings(args) if args.method == "smc" else None
    times = _times(args.times)
    rows = []
    for tree, label in ((before, "before"), (after, "after")):
        rows += curve_rows(tree, label, times, args.method, settings, node=node, step=args.step)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    methods = ("oracle", "smc") if args.method == "both" else (args.method,)
    summary = experiment_paper(args.out, args.eps, args.alpha, args.seed, args.workers, args.cold, methods)
    for key in sorted(summary):
        if key.endswith(("top4", "argmax")):
            print(f"{key}: {', '.join(summary[key])}")
    for name in MODEL_NAMES:
        for plan, r in summary[f"{name}_principles"].items():
            print(f"{plan}: {r['before']:.4f} -> {r['after']:.4f} ({100 * r['reduction']:.2f}% reduction)")
    print(f"wrote {len(summary['files'])} CSV files + summary.json to {args.out} in {summary['wall_time_s']} s")
    return EXIT_OK


def _smc_opts(p) -> None:
    p.add_argument("--eps", type=float, default=engine.DEFAULT_EPSILON)
    p.add_argument("--alpha", type=float, default=engine.DEFAULT_ALPHA)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                   help="master seed (default: $ATSMC_SEED or built-in)")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="atsmc", description="Attack trees -> stochastic timed automata -> SMC.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse and validate a model")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("translate", help="translate a model into an automata network")
    p.add_argument("file")
    p.add_argument("--dump", action="store_true", help="print the full network")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("check", help="estimate a time-bounded reachability query")
    p.add_argument("file")
    p.add_argument("--query", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--hot", help="comma-separated leaves kept at their rate; others get --cold")
    p.add_argument("--cold", type=float, default=0.002)
    _smc_opts(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="analytic CDF of a node")
    p.add_argument("file")
    p.add_argument("--node")
    p.add_argument("--times", required=True)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("analyze", help="hot/cold scenario analysis")
    p.add_argument("file")
    p.add_argument("--mode", choices=("individual", "combo"), default="individual")
    p.add_argument("--pairs")
    p.add_argument("--times", required=True)
    p.add_argument("--cold", type=float)
    p.add_argument("--method", choices=("smc", "oracle"), default="oracle")
    p.add_argument("--prefix", default="S", help="individual scenario name prefix")
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--out")
    _smc_opts(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transform", help="apply a design-principle plan")
    p.add_argument("file")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("compare", help="before/after curves of two models")
    p.add_argument("base")
    p.add_argument("after")
    p.add_argument("--node")
    p.add_argument("--times", required=True)
    p.add_argument("--method", choices=("smc", "oracle"), default="oracle")
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--out")
    _smc_opts(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="run every analysis on the bundled models")
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("both", "oracle", "smc"), default="both")
    p.add_argument("--cold", type=float, default=0.002)
    _smc_opts(p)
    p.set_defaults(func=cmd_experiment, eps=0.02)
    return ap


def run_cli(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ModelParseError as e:
        for err in e.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except TreeError as e:
        print(f"invalid model: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, TransformError, OracleError, QueryError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
