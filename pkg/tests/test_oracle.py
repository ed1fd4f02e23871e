import math
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atsmc.model import AttackTree, Node, leaf_cdf
from atsmc.oracle import OracleError, SharedSubtreeError, node_cdf, sum_cdf, top_curve
from atsmc.parser import parse_model
from atsmc.shipped import shipped_model
from atsmc.model import ScenarioSpec, apply_scenario
from helpers import erlang_cdf, random_tree, trees, two_leaf


@pytest.mark.parametrize("kind,rate,expected", [
    ("OR", 0.005, 1 - math.exp(-1)),
    ("AND", 0.01, (1 - math.exp(-1)) ** 2),
    ("SAND", 0.01, 1 - math.exp(-1) * 2),
])
def test_two_leaf_gates(kind, rate, expected):
    (_, p), = top_curve(two_leaf(kind, rate, rate), [100])
    assert p == pytest.approx(expected, abs=1e-3)
    assert round(expected, 5) in (0.63212, 0.39958, 0.26424)


def test_zero_time_is_zero():
    g = node_cdf(shipped_model("security"), "LoI", 180)
    assert g.values[0] == 0.0
    assert top_curve(two_leaf("OR", 0.1, 0.1), [0.0]) == [(0.0, 0.0)]


def test_grid_invariants():
    g = node_cdf(shipped_model("privacy"), "PrivacyLeakage", 200, 0.1)
    assert len(g.values) == 2001 and g.horizon == pytest.approx(200)
    assert np.all(np.diff(g.values) >= 0) and g.values.min() >= 0 and g.values.max() <= 1


@pytest.mark.parametrize("rate", [0.002, 0.01])
@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_sand_matches_erlang(rate, n):
    kids = [f"L{i}" for i in range(n)]
    t = AttackTree.build("E", "A", [Node.make_gate("A", "SAND", kids)] + [Node.leaf(k, rate) for k in kids])
    g = node_cdf(t, "A", 200, 0.1)
    exact = np.array([erlang_cdf(rate, n, x) for x in g.times])
    assert np.max(np.abs(g.values - exact)) < 1e-3


def test_sand_unequal_rates_hypoexponential():
    a, b = 0.02, 0.005
    t = two_leaf("SAND", a, b)
    exact = lambda x: 1 - (b * math.exp(-a * x) - a * math.exp(-b * x)) / (b - a)
    for x, p in top_curve(t, [10, 50, 100, 200]):
        assert p == pytest.approx(exact(x), abs=1e-4)


def test_single_leaf_matches_leaf_cdf():
    t = parse_model("tree T { root A leaf A rate=0.006892 }")
    (_, p), = top_curve(t, [60])
    assert p == pytest.approx(leaf_cdf(0.006892, 60), abs=1e-9)
    assert p == pytest.approx(0.3387, abs=5e-5)


def test_top_curve_cases():
    t = apply_scenario(shipped_model("security"), ScenarioSpec("cold"))
    ps = [p for _, p in top_curve(t, [60, 120, 180])]
    assert ps == sorted(ps) and 0 < ps[0] < ps[-1] < 1
    assert top_curve(t, []) == []


def test_interpolation_between_grid_points():
    t = parse_model("tree T { root A leaf A rate=0.01 }")
    g = node_cdf(t, "A", 10, 1.0)
    assert g.at(2.5) == pytest.approx((g.values[2] + g.values[3]) / 2)
    with pytest.raises(ValueError):
        g.at(11)


def test_shared_subtree_rejected():
    t = parse_model("tree T { root A gate A = AND(B, C) gate B = OR(D, E) gate C = OR(D, F)"
                    " leaf D rate=0.1 leaf E rate=0.1 leaf F rate=0.1 }")
    with pytest.raises(SharedSubtreeError, match="SMC"):
        node_cdf(t, "A", 100)
    # a subtree without the shared node is fine
    assert node_cdf(t, "B", 100).values[-1] > 0


def test_step_checks():
    t = two_leaf("OR", 0.1, 0.1)
    with pytest.raises(OracleError):
        node_cdf(t, "A", 100, 11)
    with pytest.raises(OracleError):
        node_cdf(t, "A", 100, 0)
    with pytest.raises(OracleError):
        node_cdf(t, "Z", 100)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-4, 0.1), min_size=2, max_size=4))
def test_gate_bounds(rates):
    kids = [f"L{i}" for i in range(len(rates))]
    leaves = [Node.leaf(k, r) for k, r in zip(kids, rates)]
    curves = {}
    for kind in ("OR", "AND", "SAND"):
        t = AttackTree.build("T", "A", [Node.make_gate("A", kind, kids)] + leaves)
        curves[kind] = node_cdf(t, "A", 200, 0.5).values
    singles = np.array([-np.expm1(-r * np.arange(0, 200.25, 0.5)) for r in rates])
    tol = 1e-9
    assert np.all(curves["AND"] <= singles.min(axis=0) + tol)
    assert np.all(singles.max(axis=0) <= curves["OR"] + tol)
    assert np.all(curves["SAND"] <= curves["AND"] + 1e-6)


@settings(max_examples=60, deadline=None)
@given(trees(max_nodes=10), st.randoms(use_true_random=False), st.floats(1.0, 5.0))
def test_rate_monotonicity(tree, rnd, factor):
    leaf = rnd.choice(tree.leaves())
    nodes = dict(tree.nodes)
    nodes[leaf] = replace(nodes[leaf], rate=nodes[leaf].rate * factor)
    before = node_cdf(tree, tree.top_event, 180).values
    after = node_cdf(tree.with_nodes(nodes), tree.top_event, 180).values
    assert np.all(after >= before - 1e-9)


def test_sum_cdf_with_atom_at_zero():
    x = np.arange(0, 50.01, 0.1)
    zero = np.ones_like(x)  # X = 0 almost surely
    fy = -np.expm1(-0.1 * x)
    assert np.allclose(sum_cdf(zero, fy), fy, atol=1e-12)
    assert np.allclose(sum_cdf(fy, zero), fy, atol=1e-12)


def test_random_trees_evaluate():
    rnd = random.Random(2)
    for _ in range(30):
        t = random_tree(rnd, 8)
        vals = node_cdf(t, t.top_event, 180).values
        assert np.all(np.diff(vals) >= -1e-12)
