"""Scenario analyses, before/after comparisons and CSV reports."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .engine import SmcSettings, estimate_many
from .model import AttackTree, ScenarioSpec, apply_scenario, enumerate_scenarios
from .oracle import DEFAULT_STEP, top_curve
from .principles import apply_plan
from .shipped import (BASELINE_HOT, MODEL_NAMES, PLANS, SCENARIO_PREFIX, shipped_combos,
                      shipped_model, shipped_plan)
from .translate import translate_tree

REPORT_TIMES = (60.0, 120.0, 180.0)
PRINCIPLE_TIMES = (30.0, 60.0, 90.0, 120.0, 150.0, 180.0)


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    time_s: float
    method: str
    probability: float
    ci_low: float
    ci_high: float
    runs: int
    seed: int | None

    def __post_init__(self):
        if not self.ci_low <= self.probability <= self.ci_high:
            raise ValueError(f"row {self.scenario}@{self.time_s}: probability outside its interval")


CSV_HEADER = [f.name for f in fields(ReportRow)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def rows_to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in astuple(r)])
    return buf.getvalue()


def write_csv(rows: Iterable[ReportRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def curve_rows(tree: AttackTree, name: str, times: Sequence[float], method: str,
               settings: SmcSettings | None = None, node: str | None = None,
               step: float = DEFAULT_STEP) -> list[ReportRow]:
    times = sorted(float(t) for t in times)
    node = tree.top_event if node is None else node
    if method == "oracle":
        return [ReportRow(name, t, "oracle", p, p, p, 0, None)
                for t, p in top_curve(tree, times, step, node=node)]
    if method != "smc":
        raise ValueError(f"unknown method {method!r}")
    settings = settings or SmcSettings()
    nsta = translate_tree(tree)
    loc = "Disrupt" if node == tree.top_event else "Done"
    ests = estimate_many(nsta, node, loc, times, settings)
    return [ReportRow(name, t, "smc", e.p_hat, *e.interval, e.runs, e.seed) for t, e in zip(times, ests)]


def analyze(tree: AttackTree, scenarios: Sequence[ScenarioSpec], times: Sequence[float],
            method: str = "oracle", settings: SmcSettings | None = None,
            step: float = DEFAULT_STEP) -> list[ReportRow]:
    """Rows ordered by scenario (as given), then time ascending."""
    rows = []
    for s in scenarios:
        rows += curve_rows(apply_scenario(tree, s), s.name, times, method, settings, step=step)
    return rows


def probabilities_at(rows: Sequence[ReportRow], t: float, method: str) -> dict[str, float]:
    return {r.scenario: r.probability for r in rows if r.time_s == t and r.method == method}


def top_tier(probs: dict[str, float], k: int) -> set[str]:
    """The ``k`` most likely scenarios, widened to include anything tied with the k-th."""
    ranked = sorted(probs.items(), key=lambda kv: -kv[1])
    if not ranked:
        return set()
    cut = ranked[min(k, len(ranked)) - 1][1]
    return {s for s, p in ranked if p >= cut - 1e-12}


def argmax_set(probs: dict[str, float], tol: float = 1e-12) -> set[str]:
    best = max(probs.values())
    return {s for s, p in probs.items() if p >= best - tol}


def reduction(before: float, after: float) -> float:
    return 0.0 if before == 0 else (before - after) / before


def individual_scenarios(name: str, cold: float = 0.002) -> list[ScenarioSpec]:
    return enumerate_scenarios(shipped_model(name), "individual", cold, SCENARIO_PREFIX[name])


def principle_baseline(name: str, cold: float = 0.002) -> AttackTree:
    tree = shipped_model(name)
    return apply_scenario(tree, ScenarioSpec("baseline", frozenset([BASELINE_HOT[name]]), cold))


def compare_rows(before: AttackTree, after: AttackTree, labels: tuple[str, str], times: Sequence[float],
                 methods: Sequence[str], settings: SmcSettings | None = None) -> list[ReportRow]:
    rows = []
    for tree, label in zip((before, after), labels):
        for m in methods:
            rows += curve_rows(tree, label, times, m, settings)
    return rows


def experiment_paper(outdir: str | Path, epsilon: float = 0.02, alpha: float = 0.05,
                     seed: int | None = None, workers: int = 1, cold: float = 0.002,
                     methods: Sequence[str] = ("oracle", "smc")) -> dict:
    """Run every scenario analysis and principle comparison on the shipped models.

    Writes one CSV per analysis plus ``summary.json`` and returns the summary.
    Rankings and reductions are read from the oracle rows when present.
    """
    from .engine import default_seed

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    settings = SmcSettings(epsilon, alpha, default_seed() if seed is None else seed, workers)
    rank_method = "oracle" if "oracle" in methods else methods[0]
    t_end = REPORT_TIMES[-1]
    summary: dict = {"epsilon": epsilon, "alpha": alpha, "seed": settings.seed, "cold": cold,
                     "ranking_method": rank_method, "files": []}
    started = time.perf_counter()

    for name in MODEL_NAMES:
        tree = shipped_model(name)
        ind = individual_scenarios(name, cold)
        rows = [r for m in methods for r in analyze(tree, ind, REPORT_TIMES, m, settings)]
        fname = f"{name}_individual.csv"
        write_csv(rows, out / fname)
        summary["files"].append(fname)
        probs = probabilities_at(rows, t_end, rank_method)
        summary[f"{name}_individual_top4"] = sorted(top_tier(probs, 4))
        summary[f"{name}_individual_at_{int(t_end)}"] = probs

        combos = [ScenarioSpec(s.name, s.hot, cold) for s in shipped_combos(name)]
        rows = [r for m in methods for r in analyze(tree, combos, REPORT_TIMES, m, settings)]
        fname = f"{name}_combos.csv"
        write_csv(rows, out / fname)
        summary["files"].append(fname)
        probs = probabilities_at(rows, t_end, rank_method)
        summary[f"{name}_combo_argmax"] = sorted(argmax_set(probs))
        summary[f"{name}_combo_at_{int(t_end)}"] = probs

        base = principle_baseline(name, cold)
        reductions = {}
        for plan in PLANS[name]:
            after = apply_plan(base, shipped_plan(plan))
            rows = compare_rows(base, after, ("before", "after"), PRINCIPLE_TIMES, methods, settings)
            fname = f"{plan}.csv"
            write_csv(rows, out / fname)
            summary["files"].append(fname)
            b = probabilities_at(rows, t_end, rank_method)["before"]
            a = probabilities_at(rows, t_end, rank_method)["after"]
            reductions[plan] = {"before": b, "after": a, "reduction": reduction(b, a)}
        summary[f"{name}_principles"] = reductions

    summary["wall_time_s"] = round(time.perf_counter() - started, 3)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary
