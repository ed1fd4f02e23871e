"""Stochastic timed automata and broadcast networks of them.

Execution semantics (implemented in :mod:`atsmc.engine`):

* a location with an ``Exponential`` sojourn samples a delay on entry and then
  takes its first enabled non-receiving edge;
* a location with no sojourn takes an enabled non-receiving edge immediately
  (zero delay) if it has one, otherwise it waits for a signal;
* ``ch!`` broadcasts: every other automaton sitting in a location with an
  enabled ``ch?`` edge takes that edge at the same instant. Nobody blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SEND, RECV = "!", "?"
GLOBAL_CLOCK = "x"
_OPS = ("<", "<=", "==", ">=", ">")


class CompositionError(ValueError):
    pass


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"exponential rate must be finite and >= 0, got {self.rate}")


@dataclass(frozen=True)
class ClockConstraint:
    clock: str
    op: str
    bound: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported comparison {self.op!r}")

    def holds(self, value: float) -> bool:
        op, b = self.op, self.bound
        return (value < b if op == "<" else value <= b if op == "<=" else
                value == b if op == "==" else value >= b if op == ">=" else value > b)

    def __str__(self) -> str:
        return f"{self.clock}{self.op}{self.bound:g}"


@dataclass(frozen=True)
class Action:
    channel: str
    direction: str  # SEND or RECV

    def __post_init__(self):
        if self.direction not in (SEND, RECV):
            raise ValueError(f"direction must be '!' or '?', got {self.direction!r}")

    def __str__(self) -> str:
        return f"{self.channel}{self.direction}"


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    action: Action | None = None
    guard: tuple[ClockConstraint, ...] = ()
    resets: frozenset[str] = frozenset()

    @property
    def receives(self) -> bool:
        return self.action is not None and self.action.direction == RECV

    def __str__(self) -> str:
        parts = [f"{self.source} -> {self.target}"]
        if self.guard:
            parts.append("[" + " && ".join(map(str, self.guard)) + "]")
        if self.action is not None:
            parts.append(str(self.action))
        if self.resets:
            parts.append("{" + ", ".join(f"{c}:=0" for c in sorted(self.resets)) + "}")
        return " ".join(parts)


@dataclass(frozen=True)
class STA:
    name: str
    locations: tuple[str, ...]
    initial: str
    edges: tuple[Edge, ...]
    clocks: frozenset[str] = frozenset()
    sojourn: dict[str, Exponential] = field(default_factory=dict)
    accepting: str | None = None

    @property
    def actions(self) -> set[Action]:
        return {e.action for e in self.edges if e.action is not None}

    def problems(self) -> list[str]:
        locs = set(self.locations)
        out = []
        if len(locs) != len(self.locations):
            out.append(f"{self.name}: duplicate location names")
        if self.initial not in locs:
            out.append(f"{self.name}: initial location {self.initial!r} undeclared")
        if self.accepting is not None and self.accepting not in locs:
            out.append(f"{self.name}: accepting location {self.accepting!r} undeclared")
        for loc in self.sojourn:
            if loc not in locs:
                out.append(f"{self.name}: sojourn given for undeclared location {loc!r}")
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in locs:
                    out.append(f"{self.name}: edge {e} uses undeclared location {end!r}")
        return out


@dataclass(frozen=True)
class Channel:
    name: str
    semantics: str = "broadcast"


@dataclass(frozen=True)
class NSTA:
    automata: tuple[STA, ...]
    channels: frozenset[Channel]
    global_clock: str = GLOBAL_CLOCK
    aliases: dict[str, str] = field(default_factory=dict)

    def index(self, name: str) -> int:
        for i, a in enumerate(self.automata):
            if a.name == name:
                return i
        raise KeyError(name)

    def automaton(self, name: str) -> STA:
        return self.automata[self.index(name)]

    def resolve(self, node: str, location: str) -> tuple[int, str]:
        """Find the automaton called (or aliased) ``node`` that has ``location``."""
        names = [a.name for a in self.automata]
        for cand in (node, self.aliases.get(node)):
            if cand in names:
                idx = names.index(cand)
                if location in self.automata[idx].locations:
                    return idx, location
        if node not in names and node not in self.aliases:
            raise KeyError(f"no automaton named {node!r}")
        raise KeyError(f"automaton {node!r} has no location {location!r}")


def compose(automata: Sequence[STA], channels: Iterable[Channel | str],
            global_clock: str = GLOBAL_CLOCK, aliases: dict[str, str] | None = None) -> NSTA:
    """Parallel composition over broadcast channels, keeping automaton order."""
    automata = tuple(automata)
    chans = frozenset(c if isinstance(c, Channel) else Channel(c) for c in channels)
    if not automata:
        raise CompositionError("cannot compose an empty list of automata")
    names = [a.name for a in automata]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise CompositionError(f"duplicate automaton ids: {dup}")
    cnames = [c.name for c in chans]
    if len(set(cnames)) != len(cnames):
        raise CompositionError("duplicate channel names")
    for c in chans:
        if c.semantics != "broadcast":
            raise CompositionError(f"channel {c.name!r}: only broadcast channels are supported")
    probs = [p for a in automata for p in a.problems()]
    if probs:
        raise CompositionError("; ".join(probs))
    known = set(cnames)
    senders: dict[str, set[str]] = {}
    for a in automata:
        for e in a.edges:
            if e.action is None:
                continue
            if e.action.channel not in known:
                raise CompositionError(f"{a.name}: unresolved channel {e.action.channel!r}")
            if e.action.direction == SEND:
                senders.setdefault(e.action.channel, set()).add(a.name)
    multi = {c: sorted(s) for c, s in senders.items() if len(s) > 1}
    if multi:
        raise CompositionError(f"channels with more than one sender: {multi}")
    return NSTA(automata, chans, global_clock, dict(aliases or {}))


@dataclass(frozen=True)
class NstaViolation:
    rule: str
    automaton: str | None
    message: str

    def __str__(self) -> str:
        return f"{self.rule} ({self.automaton}): {self.message}"


def validate_nsta(nsta: NSTA) -> list[NstaViolation]:
    out: list[NstaViolation] = []
    declared = {c.name for c in nsta.channels}
    senders: dict[str, set[str]] = {}
    for a in nsta.automata:
        for p in a.problems():
            out.append(NstaViolation("Malformed", a.name, p))
        clocks = set(a.clocks) | {nsta.global_clock}
        for e in a.edges:
            if e.action is not None:
                if e.action.channel not in declared:
                    out.append(NstaViolation("UndeclaredChannel", a.name, f"edge {e} uses {e.action.channel!r}"))
                if e.action.direction == SEND:
                    senders.setdefault(e.action.channel, set()).add(a.name)
            for c in [g.clock for g in e.guard] + sorted(e.resets):
                if c not in clocks:
                    out.append(NstaViolation("UnknownClock", a.name, f"edge {e} names clock {c!r}"))
        for loc, soj in a.sojourn.items():
            if not isinstance(soj, Exponential):
                out.append(NstaViolation("BadSojourn", a.name, f"location {loc!r} has unsupported sojourn"))
        if a.accepting is not None and a.accepting not in _reachable(a):
            out.append(NstaViolation("UnreachableGoal", a.name,
                                     f"accepting location {a.accepting!r} unreachable from {a.initial!r}"))
    for ch, s in sorted(senders.items()):
        if len(s) > 1:
            out.append(NstaViolation("MultiSender", None, f"channel {ch!r} sent by {sorted(s)}"))
    return out


def _reachable(a: STA) -> set[str]:
    # every receive is assumed deliverable and every guard satisfiable
    succ: dict[str, list[str]] = {}
    for e in a.edges:
        succ.setdefault(e.source, []).append(e.target)
    seen = {a.initial}
    stack = [a.initial]
    while stack:
        for nxt in succ.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def dump_nsta(nsta: NSTA) -> str:
    """Line-oriented rendering used for golden files."""
    lines = [f"nsta clock={nsta.global_clock} automata={len(nsta.automata)} channels={len(nsta.channels)}"]
    lines.append("channels " + " ".join(sorted(c.name for c in nsta.channels)))
    for alias, target in sorted(nsta.aliases.items()):
        lines.append(f"alias {alias} -> {target}")
    for a in nsta.automata:
        lines.append("")
        lines.append(f"automaton {a.name}")
        if a.clocks:
            lines.append("  clocks " + " ".join(sorted(a.clocks)))
        for loc in a.locations:
            tags = []
            if loc == a.initial:
                tags.append("initial")
            if loc == a.accepting:
                tags.append("accepting")
            soj = a.sojourn.get(loc)
            if soj is not None:
                tags.append(f"exp({soj.rate!r})")
            lines.append(f"  location {loc}" + (" [" + ", ".join(tags) + "]" if tags else ""))
        for e in a.edges:
            lines.append(f"  edge {e}")
    return "\n".join(lines) + "\n"
