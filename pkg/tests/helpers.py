"""Random tree generators and reference implementations used across the tests."""
from __future__ import annotations

import math
import random

from hypothesis import strategies as st

from atsmc.model import AttackTree, GateKind, Node

KINDS = [GateKind.OR, GateKind.AND, GateKind.SAND]


def random_tree(rnd: random.Random, max_nodes: int = 8, shared: bool = False,
                rate_range: tuple[float, float] = (0.001, 0.05), allow_zero: bool = False) -> AttackTree:
    """Grow a tree by expanding random leaves into gates until ``max_nodes`` is near."""
    target = rnd.randint(1, max_nodes)
    children: dict[str, list[str]] = {"N0": []}
    kinds: dict[str, GateKind] = {}
    counter = 1
    while True:
        leaves = [n for n, ch in children.items() if not ch]
        room = target - len(children)
        if room < 1:
            break
        nid = rnd.choice(leaves)
        kind = rnd.choice(KINDS)
        lo = 2 if kind is GateKind.SAND else 1
        if room < lo:
            kind, lo = GateKind.OR, 1
        k = rnd.randint(lo, min(room, 3))
        kinds[nid] = kind
        for _ in range(k):
            cid = f"N{counter}"
            counter += 1
            children[nid].append(cid)
            children[cid] = []
    if shared:
        order = list(children)
        for _ in range(rnd.randint(1, 3)):
            gates = [g for g in order if children[g]]
            if not gates:
                break
            g = rnd.choice(gates)
            below = _ancestors(children, g) | {g}
            cands = [n for n in order if n not in below and n not in children[g] and n != "N0"]
            if cands:
                children[g].append(rnd.choice(cands))
    nodes = []
    for nid, ch in children.items():
        if ch:
            nodes.append(Node.make_gate(nid, kinds[nid], ch))
        else:
            rate = rnd.uniform(*rate_range)
            if allow_zero and rnd.random() < 0.1:
                rate = 0.0
            nodes.append(Node.leaf(nid, round(rate, 6)))
    return AttackTree.build("Random", "N0", nodes)


def _ancestors(children: dict[str, list[str]], node: str) -> set[str]:
    parents: dict[str, set[str]] = {n: set() for n in children}
    for p, ch in children.items():
        for c in ch:
            parents[c].add(p)
    seen, stack = set(), [node]
    while stack:
        for p in parents[stack.pop()]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def trees(max_nodes: int = 8, shared: bool = False, **kw):
    return st.randoms(use_true_random=False).map(lambda r: random_tree(r, max_nodes, shared, **kw))


def two_leaf(kind: str, r1: float, r2: float) -> AttackTree:
    return AttackTree.build("T", "A", [Node.make_gate("A", kind, ["B", "C"]),
                                       Node.leaf("B", r1), Node.leaf("C", r2)])


def erlang_cdf(rate: float, n: int, t: float) -> float:
    x = rate * t
    return 1.0 - math.exp(-x) * sum(x ** k / math.factorial(k) for k in range(n))


class SplitMix64:
    """Textbook SplitMix64 (Steele, Lea, Flood 2014)."""

    def __init__(self, seed: int):
        self.x = seed % 2 ** 64

    def next(self) -> int:
        self.x = (self.x + 0x9E3779B97F4A7C15) % 2 ** 64
        z = self.x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2 ** 64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2 ** 64
        return z ^ (z >> 31)

    def uniform_open(self) -> float:
        return ((self.next() >> 11) + 0.5) / 2 ** 53


def reference_trace_seed(master: int, index: int) -> int:
    # state after (index + 1) increments from master, finalized once
    return SplitMix64((master + index * 0x9E3779B97F4A7C15) % 2 ** 64).next()


def random_transform(rnd: random.Random, tree: AttackTree):
    from atsmc.principles import TransformSpec

    leaves = tree.leaves()
    kind = rnd.choice(["hardening", "diversity", "least_privilege"])
    if kind == "least_privilege":
        k = rnd.randint(1, len(leaves))
        return TransformSpec(kind, tuple(rnd.sample(leaves, k)), scale=rnd.uniform(0.05, 1.0))
    extra = tuple((f"C{i}", round(rnd.uniform(0.0005, 0.05), 6)) for i in range(rnd.randint(1, 3)))
    return TransformSpec(kind, (rnd.choice(leaves),), extra)
