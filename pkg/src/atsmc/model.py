"""Attack-tree domain types, structural validation and hot/cold scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

DEFAULT_COLD_RATE = 0.002


class GateKind(str, Enum):
    OR = "OR"
    AND = "AND"
    SAND = "SAND"


class TreeError(ValueError):
    """Raised when an operation needs a valid tree and does not get one."""


class ScenarioError(ValueError):
    pass


def check_rate(rate: float, what: str = "rate") -> float:
    rate = float(rate)
    if not math.isfinite(rate) or rate < 0:
        raise ValueError(f"{what} must be finite and >= 0, got {rate!r}")
    return rate


@dataclass(frozen=True)
class Node:
    """A tree element: a gate (``gate`` set, ordered ``children``) or a leaf (``rate`` set).

    Rates are exponential parameters in 1/s.
    """

    id: str
    label: str = ""
    gate: GateKind | None = None
    children: tuple[str, ...] = ()
    rate: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.gate is None

    @classmethod
    def leaf(cls, id: str, rate: float, label: str | None = None) -> "Node":
        return cls(id=id, label=id if label is None else label, rate=float(rate))

    @classmethod
    def make_gate(cls, id: str, kind: GateKind | str, children: Sequence[str],
                  label: str | None = None) -> "Node":
        return cls(id=id, label=id if label is None else label,
                   gate=GateKind(kind), children=tuple(children))


@dataclass(frozen=True)
class AttackTree:
    name: str
    top_event: str
    nodes: Mapping[str, Node]

    @classmethod
    def build(cls, name: str, top_event: str, nodes: Iterable[Node]) -> "AttackTree":
        return cls(name=name, top_event=top_event, nodes={n.id: n for n in nodes})

    def __getitem__(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def leaves(self) -> list[str]:
        """Leaf ids in declaration order."""
        return [n.id for n in self.nodes.values() if n.is_leaf]

    def gates(self) -> list[str]:
        return [n.id for n in self.nodes.values() if not n.is_leaf]

    def parents(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for n in self.nodes.values():
            for c in n.children:
                if c in out and n.id not in out[c]:
                    out[c].append(n.id)
        return out

    def shared_nodes(self) -> set[str]:
        return {nid for nid, ps in self.parents().items() if len(ps) > 1}

    def descendants(self, node_id: str) -> list[str]:
        """``node_id`` and everything below it, depth-first pre-order, no repeats."""
        seen: list[str] = []
        stack = [node_id]
        mark = set()
        while stack:
            nid = stack.pop()
            if nid in mark or nid not in self.nodes:
                continue
            mark.add(nid)
            seen.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return seen

    def topological_order(self) -> list[str]:
        """Parents before children; ties broken by declaration order. Tree must be acyclic."""
        indeg = {nid: 0 for nid in self.nodes}
        for n in self.nodes.values():
            for c in set(n.children):
                if c in indeg:
                    indeg[c] += 1
        order = []
        ready = [nid for nid in self.nodes if indeg[nid] == 0]
        pos = {nid: i for i, nid in enumerate(self.nodes)}
        while ready:
            ready.sort(key=pos.__getitem__)
            nid = ready.pop(0)
            order.append(nid)
            for c in dict.fromkeys(self.nodes[nid].children):
                if c in indeg:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        ready.append(c)
        if len(order) != len(self.nodes):
            raise TreeError("tree contains a cycle")
        return order

    def with_nodes(self, nodes: Mapping[str, Node], top_event: str | None = None) -> "AttackTree":
        return replace(self, nodes=dict(nodes),
                       top_event=self.top_event if top_event is None else top_event)


@dataclass(frozen=True)
class Violation:
    rule: str
    node: str | None
    message: str

    def __str__(self) -> str:
        where = f" at {self.node}" if self.node is not None else ""
        return f"{self.rule}{where}: {self.message}"


def validate_tree(tree: AttackTree) -> list[Violation]:
    out: list[Violation] = []
    nodes = tree.nodes
    for key, n in nodes.items():
        if key != n.id:
            out.append(Violation("IdMismatch", key, f"map key {key!r} holds node {n.id!r}"))
        if n.is_leaf:
            if n.children:
                out.append(Violation("LeafWithChildren", n.id, "leaf declares children"))
            if n.rate is None or not math.isfinite(n.rate) or n.rate < 0:
                out.append(Violation("BadRate", n.id, f"leaf rate {n.rate!r} is not a finite value >= 0"))
        else:
            if not n.children:
                out.append(Violation("EmptyGate", n.id, "gate has no children"))
            elif n.gate is GateKind.SAND and len(n.children) < 2:
                out.append(Violation("SandArity", n.id, "SAND gate needs at least 2 children"))
            if len(set(n.children)) != len(n.children):
                out.append(Violation("DuplicateChild", n.id, "gate lists a child more than once"))
            for c in n.children:
                if c not in nodes:
                    out.append(Violation("DanglingChild", n.id, f"child {c!r} is not declared"))

    if tree.top_event not in nodes:
        out.append(Violation("MissingTop", tree.top_event, "top event is not declared"))
        return out

    parents = tree.parents()
    if parents[tree.top_event]:
        out.append(Violation("TopHasParent", tree.top_event,
                             f"top event has parents {parents[tree.top_event]}"))

    cycle = _find_cycle(nodes)
    if cycle:
        out.append(Violation("CycleDetected", cycle[0], " -> ".join(cycle)))

    reachable = set(tree.descendants(tree.top_event))
    for nid in nodes:
        if nid not in reachable:
            out.append(Violation("Unreachable", nid, "node is not reachable from the top event"))
    return out


def _find_cycle(nodes: Mapping[str, Node]) -> list[str] | None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in nodes}
    for start in nodes:
        if color[start] != WHITE:
            continue
        path = [start]
        iters = [iter(nodes[start].children)]
        color[start] = GREY
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                color[path.pop()] = BLACK
                iters.pop()
                continue
            if nxt not in nodes:
                continue
            if color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                iters.append(iter(nodes[nxt].children))
    return None


def require_valid(tree: AttackTree) -> None:
    problems = validate_tree(tree)
    if problems:
        raise TreeError("; ".join(map(str, problems)))


def leaf_cdf(rate: float, t: float) -> float:
    """P(leaf completes by ``t``) = 1 - exp(-rate * t)."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    return -math.expm1(-check_rate(rate) * t)


@dataclass(frozen=True)
class ScenarioSpec:
    """Leaves in ``hot`` keep their model rate, every other leaf is set to ``cold_rate``."""

    name: str
    hot: frozenset[str] = field(default_factory=frozenset)
    cold_rate: float = DEFAULT_COLD_RATE

    def __post_init__(self):
        object.__setattr__(self, "hot", frozenset(self.hot))
        if not (math.isfinite(self.cold_rate) and self.cold_rate > 0):
            raise ScenarioError(f"scenario {self.name!r}: cold rate must be > 0, got {self.cold_rate}")


def check_scenario(tree: AttackTree, scenario: ScenarioSpec) -> None:
    for hid in sorted(scenario.hot):
        if hid not in tree.nodes:
            raise ScenarioError(f"scenario {scenario.name!r}: unknown node {hid!r}")
        if not tree.nodes[hid].is_leaf:
            raise ScenarioError(f"scenario {scenario.name!r}: {hid!r} is a gate, not a leaf")


def apply_scenario(tree: AttackTree, scenario: ScenarioSpec) -> AttackTree:
    check_scenario(tree, scenario)
    nodes = {
        nid: n if (not n.is_leaf or nid in scenario.hot) else replace(n, rate=scenario.cold_rate)
        for nid, n in tree.nodes.items()
    }
    return tree.with_nodes(nodes)


def enumerate_scenarios(tree: AttackTree, mode: str | Sequence[Sequence[str]] = "individual",
                        cold_rate: float = DEFAULT_COLD_RATE, prefix: str = "S") -> list[ScenarioSpec]:
    """One scenario per leaf (``mode="individual"``) or one per id pair.

    Individual scenarios are named ``{prefix}1..`` in leaf declaration order,
    pair scenarios ``{prefix}1*..`` in the order given.
    """
    if isinstance(mode, str):
        if mode != "individual":
            raise ValueError(f"unknown scenario mode {mode!r}")
        return [ScenarioSpec(f"{prefix}{i}", frozenset([lid]), cold_rate)
                for i, lid in enumerate(tree.leaves(), 1)]
    out = []
    for i, pair in enumerate(mode, 1):
        spec = ScenarioSpec(f"{prefix}{i}*", frozenset(pair), cold_rate)
        check_scenario(tree, spec)
        out.append(spec)
    return out
