"""End-to-end acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py -s`` to see the measured numbers; the
terminal summary lists one PASS/FAIL line per criterion either way.
"""
import json
import random
import time
from pathlib import Path

import numpy as np
import pytest

from atsmc.cli import run_cli
from atsmc.engine import (DEFAULT_SEED, Estimate, SmcSettings, Verdict, check_threshold, estimate,
                          estimate_many, parse_query, required_runs, simulate_trace, trace_seed)
from atsmc.experiment import (analyze, argmax_set, experiment_paper, individual_scenarios, principle_baseline,
                              probabilities_at, reduction, top_tier)
from atsmc.model import AttackTree, Node
from atsmc.oracle import node_cdf, top_curve
from atsmc.parser import ModelParseError, parse_model, serialize_model
from atsmc.principles import TransformSpec, apply_plan
from atsmc.shipped import PLANS, shipped_combos, shipped_model, shipped_plan
from atsmc.translate import translate_tree
from helpers import erlang_cdf, random_transform, random_tree, two_leaf

criterion = pytest.mark.criterion
FIXTURES = Path(__file__).parent / "fixtures"


def say(msg):
    print(f"\n  {msg}")


@criterion(1, "closed-form 2-leaf gates: oracle within 1e-3, SMC within eps+1e-3, < 5 s")
def test_closed_form_gates():
    cases = [("OR", 0.005, 0.63212), ("AND", 0.01, 0.39958), ("SAND", 0.01, 0.26424)]
    settings = SmcSettings(0.01, 0.05, DEFAULT_SEED)
    assert settings.runs == 18445
    start = time.perf_counter()
    for kind, rate, exact in cases:
        tree = two_leaf(kind, rate, rate)
        (_, p_or), = top_curve(tree, [100])
        nsta = translate_tree(tree)
        est = estimate(nsta, parse_query("Pr[x<=100](<> A.Disrupt)", nsta), settings)
        say(f"{kind}: exact {exact} oracle {p_or:.5f} smc {est.p_hat:.5f}")
        assert abs(p_or - exact) <= 1e-3
        assert abs(est.p_hat - exact) <= 0.01 + 1e-3
    elapsed = time.perf_counter() - start
    say(f"elapsed {elapsed:.2f} s")
    assert elapsed < 5


@criterion(2, "sample size formula")
def test_sample_size():
    assert required_runs(0.01, 0.05) == 18445
    assert required_runs(0.05, 0.05) == 738
    assert required_runs(0.1, 0.02) == 231


@criterion(3, "oracle vs SMC on 100 random shared-free trees: >= 95% within 0.021, < 2 min")
def test_oracle_smc_sweep():
    rnd = random.Random(3)
    settings = SmcSettings(0.02, 0.05, DEFAULT_SEED)
    times = [60.0, 120.0, 180.0]
    start = time.perf_counter()
    hits = checks = 0
    worst = 0.0
    for _ in range(100):
        tree = random_tree(rnd, 8)
        exact = [p for _, p in top_curve(tree, times)]
        ests = estimate_many(translate_tree(tree), tree.top_event, "Disrupt", times, settings)
        for e, p in zip(ests, exact):
            err = abs(e.p_hat - p)
            worst = max(worst, err)
            hits += err <= 0.021
            checks += 1
    elapsed = time.perf_counter() - start
    say(f"{hits}/{checks} within 0.021, worst {worst:.4f}, elapsed {elapsed:.1f} s")
    assert hits >= 0.95 * checks
    assert elapsed < 120


@criterion(4, "SAND over n equal-rate leaves matches Erlang-n within 1e-3")
def test_erlang_calibration():
    worst = 0.0
    for n in (2, 3, 4):
        for rate in (0.002, 0.01):
            kids = [f"L{i}" for i in range(n)]
            tree = AttackTree.build("E", "A", [Node.make_gate("A", "SAND", kids)] + [Node.leaf(k, rate) for k in kids])
            grid = node_cdf(tree, "A", 200, 0.1)
            exact = np.array([erlang_cdf(rate, n, t) for t in grid.times])
            worst = max(worst, float(np.max(np.abs(grid.values - exact))))
    say(f"max abs error {worst:.2e}")
    assert worst <= 1e-3


@criterion(5, "scenario rankings on the shipped models (oracle, t=180, K=0.002), < 10 s")
def test_rankings():
    start = time.perf_counter()
    sec, priv = shipped_model("security"), shipped_model("privacy")

    def probs(tree, scenarios):
        return probabilities_at(analyze(tree, scenarios, [180.0], "oracle"), 180.0, "oracle")

    sec_ind = probs(sec, individual_scenarios("security"))
    sec_combo = probs(sec, shipped_combos("security"))
    priv_ind = probs(priv, individual_scenarios("privacy"))
    priv_combo = probs(priv, shipped_combos("privacy"))
    elapsed = time.perf_counter() - start
    say(f"security top-4 {sorted(top_tier(sec_ind, 4))}, combo argmax {sorted(argmax_set(sec_combo))}")
    say(f"privacy top-4 {sorted(top_tier(priv_ind, 4))}, combo argmax {sorted(argmax_set(priv_combo))}")
    assert top_tier(sec_ind, 4) == {"TS2", "TS3", "TS4", "TS7"}
    assert argmax_set(sec_combo) <= {"TS6*", "TS7*"}
    assert top_tier(priv_ind, 4) == {"PTS1", "PTS3", "PTS4", "PTS9"}
    assert argmax_set(priv_combo) == {"PTS1*"}
    assert elapsed < 10


def _curve(tree):
    grid = node_cdf(tree, tree.top_event, 180.0)
    return grid.values


@criterion(6, "mitigation monotonicity and shipped plan reductions (>= 10% security, >= 40% privacy)")
def test_mitigation():
    rnd = random.Random(6)
    for _ in range(200):
        tree = random_tree(rnd, 8)
        after = apply_plan(tree, [random_transform(rnd, tree)])
        assert np.all(_curve(after) <= _curve(tree) + 1e-12)
        leaves = tree.leaves()
        if len(leaves) >= 2:
            a, b = rnd.sample(leaves, 2)
            s1 = TransformSpec("diversity", (a,), (("D", 0.005),))
            s2 = TransformSpec("least_privilege", (b,), scale=0.5)
            both = _curve(apply_plan(tree, [s1, s2]))
            assert np.all(both <= _curve(apply_plan(tree, [s1])) + 1e-12)
            assert np.all(both <= _curve(apply_plan(tree, [s2])) + 1e-12)

    reductions = {}
    for name in PLANS:
        base = principle_baseline(name)
        before = _curve(base)
        curves = {}
        for plan in PLANS[name]:
            curves[plan] = _curve(apply_plan(base, shipped_plan(plan)))
            assert np.all(curves[plan] <= before + 1e-12)
            reductions[plan] = reduction(before[-1], curves[plan][-1])
        *singles, combined = PLANS[name]
        for s in singles:
            assert np.all(curves[combined] <= curves[s] + 1e-12)
    say(", ".join(f"{k} {100 * v:.2f}%" for k, v in reductions.items()))
    assert reductions["security_combined"] >= 0.10
    assert reductions["privacy_combined"] >= 0.40


@criterion(7, "check output identical across runs and worker counts; golden traces match")
def test_determinism(tmp_path, capsys):
    model = tmp_path / "security.adt"
    model.write_text(serialize_model(shipped_model("security"), "dsl"))
    args = ["check", str(model), "--query", "Pr[x<=180](<> LoI.Disrupt)"]
    outs = []
    for w in ("1", "8", "1"):
        assert run_cli(args + ["--workers", w]) == 0
        outs.append(capsys.readouterr().out)
    say(outs[0].strip())
    assert outs[0] == outs[1] == outs[2]
    gold = json.loads((FIXTURES / "golden_traces.json").read_text())
    nsta = translate_tree(parse_model(gold["model"]))
    assert len(gold["traces"]) == 3
    for i, item in gold["traces"].items():
        seed = trace_seed(gold["master_seed"], int(i))
        tr = simulate_trace(nsta, seed, gold["horizon"], nsta.resolve("L", "Disrupt"))
        assert json.loads(tr.to_json()) == item["trace"]


@criterion(8, "round trip on 1000 random trees; 10^4 random byte strings only raise span-tagged errors")
def test_parser_robustness():
    rnd = random.Random(8)
    for i in range(1000):
        tree = random_tree(rnd, 12, shared=bool(i % 2))
        fmt = "json" if i % 3 == 0 else "dsl"
        assert parse_model(serialize_model(tree, fmt)) == tree
    alphabet = b"tree root gate leaf rate = OR AND SAND ( ) , { } [ ] : # \n \" 0.1 1e3 A B"
    seeds = [serialize_model(random_tree(rnd, 8), fmt).encode() for fmt in ("dsl", "json") for _ in range(20)]
    rejected = 0
    for i in range(10_000):
        n = rnd.randrange(120)
        if i % 3 == 0:
            data = bytes(rnd.randrange(256) for _ in range(n))
        elif i % 3 == 1:
            data = bytes(rnd.choice(alphabet) for _ in range(n))
        else:
            # a valid model with a few bytes overwritten, dropped or duplicated
            buf = bytearray(rnd.choice(seeds))
            for _ in range(rnd.randint(1, 3)):
                k = rnd.randrange(len(buf))
                op = rnd.randrange(3)
                if op == 0:
                    buf[k] = rnd.randrange(256)
                elif op == 1:
                    del buf[k]
                else:
                    buf.insert(k, buf[k])
            data = bytes(buf)
        try:
            parse_model(data)
        except ModelParseError as e:
            rejected += 1
            assert e.errors
            assert all(err.span.line >= 1 and err.span.column >= 1 for err in e.errors)
    say(f"{rejected} of 10000 fuzz inputs rejected, none crashed")


@criterion(9, "threshold verdicts at 0.25")
def test_verdicts():
    def est(p):
        return Estimate(p, 0.01, 18445, round(p * 18445), 0.05, DEFAULT_SEED)

    assert check_threshold(est(0.53), 0.25) is Verdict.ABOVE
    assert check_threshold(est(0.10), 0.25) is Verdict.BELOW
    assert check_threshold(est(0.25), 0.25) is Verdict.INCONCLUSIVE


TWENTY = """tree Twenty {
  root R
  gate R = OR(G1, G2, G3)
  gate G1 = AND(G4, L1)
  gate G4 = OR(L2, L3, L4)
  gate G2 = SAND(L5, G5, L6)
  gate G5 = OR(L7, L8)
  gate G3 = AND(L9, G6)
  gate G6 = SAND(L10, L11, L12, L13)
  leaf L1 rate=0.01  leaf L2 rate=0.004  leaf L3 rate=0.006  leaf L4 rate=0.002
  leaf L5 rate=0.02  leaf L6 rate=0.015  leaf L7 rate=0.003  leaf L8 rate=0.007
  leaf L9 rate=0.009 leaf L10 rate=0.05  leaf L11 rate=0.04  leaf L12 rate=0.03
  leaf L13 rate=0.02
}"""


@criterion(10, "full experiment at eps=0.02 < 300 s; 20-node estimate at 18445 runs < 10 s")
def test_performance(tmp_path):
    tree = parse_model(TWENTY)
    assert len(tree.nodes) == 20
    nsta = translate_tree(tree)
    start = time.perf_counter()
    est = estimate(nsta, parse_query("Pr[x<=180](<> R.Disrupt)", nsta), SmcSettings(0.01, 0.05, DEFAULT_SEED))
    single = time.perf_counter() - start
    assert est.runs == 18445

    start = time.perf_counter()
    summary = experiment_paper(tmp_path / "exp", epsilon=0.02)
    full = time.perf_counter() - start
    say(f"20-node estimate {single:.2f} s (p={est.p_hat:.4f}); experiment {full:.1f} s, "
        f"{len(summary['files'])} CSV files")
    assert (tmp_path / "exp" / "summary.json").exists()
    assert json.loads((tmp_path / "exp" / "summary.json").read_text())["security_individual_top4"] == \
        ["TS2", "TS3", "TS4", "TS7"]
    assert single < 10
    assert full < 300
