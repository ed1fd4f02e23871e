"""Design-principle rewrites of attack trees and plan files.

Hardening and diversity wrap a leaf ``X`` into ``AND(X, bypass_1, ...)``: the
attacker must additionally defeat every added countermeasure. Least privilege
scales leaf rates down without touching the structure.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .model import AttackTree, GateKind, Node, check_rate, require_valid


class Principle(str, Enum):
    HARDENING = "hardening"
    DIVERSITY = "diversity"
    LEAST_PRIVILEGE = "least_privilege"


class TransformError(ValueError):
    pass


class PlanError(TransformError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"plan step {index}: {message}")


@dataclass(frozen=True)
class TransformSpec:
    kind: Principle
    targets: tuple[str, ...]
    new_leaves: tuple[tuple[str, float], ...] = ()
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Principle(self.kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "new_leaves", tuple((str(l), float(r)) for l, r in self.new_leaves))
        if not self.targets:
            raise TransformError(f"{self.kind.value}: no target given")
        if self.kind is Principle.LEAST_PRIVILEGE:
            if self.scale is None or not (0 < self.scale <= 1):
                raise TransformError(f"least privilege scale must be in (0, 1], got {self.scale}")
        else:
            if len(self.targets) != 1:
                raise TransformError(f"{self.kind.value} takes exactly one target leaf")
            if not self.new_leaves:
                raise TransformError(f"{self.kind.value} needs at least one added leaf")

    def describe(self) -> str:
        if self.kind is Principle.LEAST_PRIVILEGE:
            return f"least_privilege x{self.scale:g} on {', '.join(self.targets)}"
        added = ", ".join(f"{l}@{r:g}" for l, r in self.new_leaves)
        return f"{self.kind.value} on {self.targets[0]} adding [{added}]"


def _leaf_target(tree: AttackTree, target: str) -> Node:
    if target not in tree.nodes:
        raise TransformError(f"unknown node {target!r}")
    n = tree.nodes[target]
    if not n.is_leaf:
        raise TransformError(f"{target!r} is a gate; principles apply to leaves")
    return n


def _fresh(base: str, taken) -> str:
    base = re.sub(r"\W", "_", base)
    if base not in taken:
        return base
    i = 2
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


def _wrap_in_and(tree: AttackTree, target: str, extra: Sequence[tuple[str, float]],
                 suffix: str) -> AttackTree:
    require_valid(tree)
    _leaf_target(tree, target)
    if not extra:
        raise TransformError("at least one added leaf is required")
    labels = [l for l, _ in extra]
    if len(set(labels)) != len(labels):
        raise TransformError(f"duplicate added labels {labels}")
    taken = set(tree.nodes)
    gate_id = _fresh(f"{target}_{suffix}", taken)
    taken.add(gate_id)
    new_leaves = []
    for label, rate in extra:
        lid = _fresh(f"{target}_{label}", taken)
        taken.add(lid)
        new_leaves.append(Node.leaf(lid, check_rate(rate), label))
    nodes = {}
    for nid, n in tree.nodes.items():
        if target in n.children:
            n = replace(n, children=tuple(gate_id if c == target else c for c in n.children))
        nodes[nid] = n
    old = tree.nodes[target]
    nodes[gate_id] = Node.make_gate(gate_id, GateKind.AND, [target] + [l.id for l in new_leaves],
                                    f"{old.label} ({suffix.lower()})")
    for l in new_leaves:
        nodes[l.id] = l
    top = gate_id if tree.top_event == target else tree.top_event
    return tree.with_nodes(nodes, top)


def apply_hardening(tree: AttackTree, target: str,
                    countermeasures: Sequence[tuple[str, float]]) -> AttackTree:
    return _wrap_in_and(tree, target, countermeasures, "Hardened")


def apply_diversity(tree: AttackTree, target: str, factors: Sequence[tuple[str, float]]) -> AttackTree:
    return _wrap_in_and(tree, target, factors, "Diversified")


def apply_least_privilege(tree: AttackTree, targets: Sequence[str], scale: float) -> AttackTree:
    require_valid(tree)
    if not (0 < scale <= 1):
        raise TransformError(f"scale must be in (0, 1], got {scale}")
    nodes = dict(tree.nodes)
    for t in targets:
        n = _leaf_target(tree, t)
        nodes[t] = replace(n, rate=n.rate * scale)
    return tree.with_nodes(nodes)


def apply_transform(tree: AttackTree, spec: TransformSpec) -> AttackTree:
    if spec.kind is Principle.HARDENING:
        return apply_hardening(tree, spec.targets[0], spec.new_leaves)
    if spec.kind is Principle.DIVERSITY:
        return apply_diversity(tree, spec.targets[0], spec.new_leaves)
    return apply_least_privilege(tree, spec.targets, spec.scale)


def apply_plan(tree: AttackTree, specs: Sequence[TransformSpec],
               report: list[str] | None = None) -> AttackTree:
    """Apply ``specs`` left to right; the first failing step raises PlanError with its index."""
    for i, spec in enumerate(specs):
        try:
            tree = apply_transform(tree, spec)
        except (TransformError, ValueError) as e:
            raise PlanError(i, str(e)) from None
        if report is not None:
            report.append(spec.describe())
    return tree


def parse_plan(text: str) -> list[TransformSpec]:
    """Read ``{"plan": [{"kind": ..., "target"/"targets": ..., "leaves"/"scale": ...}, ...]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TransformError(f"plan is not valid JSON: {e}") from None
    steps = doc.get("plan") if isinstance(doc, dict) else None
    if not isinstance(steps, list):
        raise TransformError("plan file needs a top-level 'plan' list")
    out = []
    for i, step in enumerate(steps):
        try:
            kind = Principle(step["kind"])
            if kind is Principle.LEAST_PRIVILEGE:
                scale = step["scale"]
                if isinstance(scale, bool) or not isinstance(scale, (int, float)) or not math.isfinite(scale):
                    raise TransformError("scale must be a number")
                out.append(TransformSpec(kind, tuple(step["targets"]), scale=float(scale)))
            else:
                target = step.get("target")
                targets = (target,) if target is not None else tuple(step["targets"])
                leaves = tuple((lf["label"], lf["rate"]) for lf in step["leaves"])
                out.append(TransformSpec(kind, targets, leaves))
        except (KeyError, TypeError, ValueError) as e:
            raise PlanError(i, f"malformed step: {e}") from None
    return out


def dump_plan(specs: Sequence[TransformSpec]) -> str:
    steps = []
    for s in specs:
        if s.kind is Principle.LEAST_PRIVILEGE:
            steps.append({"kind": s.kind.value, "targets": list(s.targets), "scale": s.scale})
        else:
            steps.append({"kind": s.kind.value, "target": s.targets[0],
                          "leaves": [{"label": l, "rate": r} for l, r in s.new_leaves]})
    return json.dumps({"plan": steps}, indent=2) + "\n"
