"""Event-driven NSTA simulation and statistical model checking.

Randomness: every trace owns a SplitMix64 stream. The stream state starts at
``trace_seed(master, i) = mix64(master + (i + 1) * GOLDEN)`` and each draw does
``state += GOLDEN; z = mix64(state)`` and maps ``z`` to ``((z >> 11) + 0.5) / 2**53``,
a uniform on the open interval (0, 1). ``mix64`` is the SplitMix64 finalizer
with constants 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB (shifts 30, 27, 31).
These constants are part of the output contract: golden traces depend on them.
"""
from __future__ import annotations

import heapq
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .sta import NSTA, RECV, SEND

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
DEFAULT_SEED = 20190610
DEFAULT_EPSILON = 0.01
DEFAULT_ALPHA = 0.05
_TWO53 = 2.0 ** -53


class SimulationError(RuntimeError):
    pass


class QueryError(ValueError):
    pass


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def trace_seed(master: int, index: int) -> int:
    return mix64((master + (index + 1) * GOLDEN) & MASK64)


def default_seed() -> int:
    env = os.environ.get("ATSMC_SEED")
    return int(env, 0) & MASK64 if env else DEFAULT_SEED


# --- queries -----------------------------------------------------------------

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_QUERY_RE = re.compile(
    rf"^\s*Pr\s*\[\s*({_IDENT})\s*<=\s*({_NUM})\s*\]\s*\(\s*<>\s*({_IDENT})\s*\.\s*({_IDENT})\s*\)\s*$")


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v))


@dataclass(frozen=True)
class SmcQuery:
    """``Pr[x<=T](<> NODE.LOCATION)``: probability of entering a location by time T."""

    time_bound: float
    node: str
    location: str
    clock: str = "x"

    def __str__(self) -> str:
        return f"Pr[{self.clock}<={_fmt_num(self.time_bound)}](<> {self.node}.{self.location})"

    def target(self, nsta: NSTA) -> tuple[int, str]:
        try:
            return nsta.resolve(self.node, self.location)
        except KeyError as e:
            raise QueryError(str(e.args[0])) from None


def parse_query(text: str, nsta: NSTA | None = None) -> SmcQuery:
    m = _QUERY_RE.match(text)
    if m is None:
        raise QueryError(f"malformed query {text!r}; expected Pr[x<=T](<> NODE.LOCATION)")
    clock, bound, node, loc = m.groups()
    t = float(bound)
    if not (math.isfinite(t) and t > 0):
        raise QueryError(f"time bound must be positive, got {bound}")
    q = SmcQuery(t, node, loc, clock)
    if nsta is not None:
        if clock != nsta.global_clock:
            raise QueryError(f"unknown clock {clock!r}; the network clock is {nsta.global_clock!r}")
        q.target(nsta)
    return q


# --- settings & results ------------------------------------------------------

@dataclass(frozen=True)
class SmcSettings:
    epsilon: float = DEFAULT_EPSILON
    alpha: float = DEFAULT_ALPHA
    seed: int = DEFAULT_SEED
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def runs(self) -> int:
        return required_runs(self.epsilon, self.alpha)


def required_runs(epsilon: float, alpha: float) -> int:
    """Sample count N with P(|p_hat - p| > epsilon) <= alpha (two-sided Hoeffding/Okamoto)."""
    if not (0 < epsilon < 1 and 0 < alpha < 1):
        raise ValueError("epsilon and alpha must lie in (0, 1)")
    return math.ceil(math.log(2.0 / alpha) / (2.0 * epsilon * epsilon))


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    half_width: float
    runs: int
    successes: int
    alpha: float = DEFAULT_ALPHA
    seed: int = DEFAULT_SEED
    wall_time: float = field(default=0.0, compare=False)

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.p_hat - self.half_width), min(1.0, self.p_hat + self.half_width)

    def to_json(self) -> str:
        return json.dumps({"p_hat": self.p_hat, "epsilon": self.half_width, "alpha": self.alpha,
                           "runs": self.runs, "successes": self.successes, "seed": self.seed},
                          sort_keys=False)


class Verdict(str, Enum):
    BELOW = "Below"
    ABOVE = "Above"
    INCONCLUSIVE = "Inconclusive"


def check_threshold(estimate: Estimate, threshold: float) -> Verdict:
    lo, hi = estimate.interval
    if hi < threshold:
        return Verdict.BELOW
    if lo > threshold:
        return Verdict.ABOVE
    return Verdict.INCONCLUSIVE


# --- compiled network ----------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    time: float
    automaton: str
    source: str
    target: str
    signal: str | None = None

    def to_dict(self) -> dict:
        return {"time": self.time, "automaton": self.automaton, "source": self.source,
                "target": self.target, "signal": self.signal}


@dataclass(frozen=True)
class Trace:
    events: tuple[TraceEvent, ...]
    horizon: float
    goal_time: float | None = None

    def to_json(self) -> str:
        return json.dumps({"horizon": self.horizon, "goal_time": self.goal_time,
                           "events": [e.to_dict() for e in self.events]}, indent=1)


class _Compiled:
    """Index-based form of an NSTA for the hot simulation loop.

    Edge tuple: (target_loc, send_channel or -1, guard or None, resets or None, label)
    """

    def __init__(self, nsta: NSTA):
        self.nsta = nsta
        autos = nsta.automata
        self.n = len(autos)
        self.names = [a.name for a in autos]
        chan_names = sorted(c.name for c in nsta.channels)
        self.chan_names = chan_names
        cidx = {c: i for i, c in enumerate(chan_names)}
        clocks = sorted({nsta.global_clock}.union(*(a.clocks for a in autos),
                                                  *({g.clock for e in a.edges for g in e.guard} | set(e.resets)
                                                    for a in autos for e in a.edges)))
        self.clock_names = clocks
        kidx = {c: i for i, c in enumerate(clocks)}
        self.loc_names: list[list[str]] = []
        self.initial: list[int] = []
        self.rate: list[list[float | None]] = []
        self.spont: list[list[tuple]] = []
        self.recv: list[list[dict[int, tuple]]] = []
        listeners: list[set[int]] = [set() for _ in chan_names]
        for ai, a in enumerate(autos):
            lidx = {l: i for i, l in enumerate(a.locations)}
            self.loc_names.append(list(a.locations))
            self.initial.append(lidx[a.initial])
            rates = []
            for l in a.locations:
                soj = a.sojourn.get(l)
                rates.append(None if soj is None else float(soj.rate))
            self.rate.append(rates)
            spont: list[list] = [[] for _ in a.locations]
            recv: list[dict[int, list]] = [{} for _ in a.locations]
            for e in a.edges:
                guard = tuple((kidx[g.clock], g.op, g.bound) for g in e.guard) or None
                resets = tuple(kidx[c] for c in sorted(e.resets)) or None
                send = cidx[e.action.channel] if e.action is not None and e.action.direction == SEND else -1
                ce = (lidx[e.target], send, guard, resets, e)
                if e.action is not None and e.action.direction == RECV:
                    ch = cidx[e.action.channel]
                    recv[lidx[e.source]].setdefault(ch, []).append(ce)
                    listeners[ch].add(ai)
                else:
                    spont[lidx[e.source]].append(ce)
            self.spont.append([tuple(s) for s in spont])
            self.recv.append([{k: tuple(v) for k, v in r.items()} for r in recv])
        self.listeners = [tuple(sorted(s)) for s in listeners]


def _guard_ok(guard, now: float, resets: list[float]) -> bool:
    for k, op, b in guard:
        v = now - resets[k]
        if not (v < b if op == "<" else v <= b if op == "<=" else
                v == b if op == "==" else v >= b if op == ">=" else v > b):
            return False
    return True


def _earliest(guard, now: float, resets: list[float]) -> float:
    """First instant >= now at which ``guard`` holds, or inf."""
    t = now
    for k, op, b in guard:
        edge_t = resets[k] + b
        if op in (">=", "=="):
            t = max(t, edge_t)
        elif op == ">":
            t = max(t, math.nextafter(edge_t, math.inf) if edge_t >= t else t)
    return t if _guard_ok(guard, t, resets) else math.inf


def _run(c: _Compiled, seed: int, horizon: float, goal: tuple[int, int] | None,
         record: list | None = None) -> float:
    """Simulate one trace; returns the goal entry time or inf."""
    n = c.n
    rate, spont, recv, listeners = c.rate, c.spont, c.recv, c.listeners
    loc = list(c.initial)
    resets = [0.0] * len(c.clock_names)
    token = [0] * n
    timed: list = []
    urgent: list = []
    queued = [False] * n
    state = seed
    goal_a, goal_l = goal if goal is not None else (-1, -1)
    now = 0.0
    hit = math.inf
    limit = 10 * n
    heappush, heappop = heapq.heappush, heapq.heappop
    log = math.log

    def enter(a: int, l: int) -> None:
        nonlocal state, hit
        loc[a] = l
        token[a] += 1
        if a == goal_a and l == goal_l and hit == math.inf:
            hit = now
        r = rate[a][l]
        if r is None:
            if spont[a][l] and not queued[a]:
                queued[a] = True
                heappush(urgent, a)
        elif r > 0.0:
            state = (state + GOLDEN) & MASK64
            z = state
            z = ((z ^ (z >> 30)) * MIX1) & MASK64
            z = ((z ^ (z >> 27)) * MIX2) & MASK64
            z ^= z >> 31
            u = ((z >> 11) + 0.5) * _TWO53
            heappush(timed, (now - log(u) / r, a, token[a]))

    def fire(a: int, e: tuple) -> None:
        src = loc[a]
        if e[3] is not None:
            for k in e[3]:
                resets[k] = now
        enter(a, e[0])
        ch = e[1]
        if record is not None:
            record.append(TraceEvent(now, c.names[a], c.loc_names[a][src], c.loc_names[a][e[0]],
                                     None if ch < 0 else c.chan_names[ch] + "!"))
        if ch < 0:
            return
        for b in listeners[ch]:
            if b == a:
                continue
            cands = recv[b][loc[b]].get(ch)
            if cands is None:
                continue
            for e2 in cands:
                if e2[2] is None or _guard_ok(e2[2], now, resets):
                    bsrc = loc[b]
                    if e2[3] is not None:
                        for k in e2[3]:
                            resets[k] = now
                    enter(b, e2[0])
                    if record is not None:
                        record.append(TraceEvent(now, c.names[b], c.loc_names[b][bsrc],
                                                 c.loc_names[b][e2[0]], c.chan_names[ch] + "?"))
                    break

    def settle() -> None:
        count = 0
        while urgent and hit == math.inf:
            a = heappop(urgent)
            queued[a] = False
            l = loc[a]
            if rate[a][l] is not None:
                continue
            chosen = None
            wake = math.inf
            for e in spont[a][l]:
                if e[2] is None or _guard_ok(e[2], now, resets):
                    chosen = e
                    break
                wake = min(wake, _earliest(e[2], now, resets))
            if chosen is None:
                if wake < math.inf:
                    heappush(timed, (wake, a, token[a]))
                continue
            count += 1
            if count > limit:
                raise SimulationError(
                    f"more than {limit} zero-delay transitions at t={now}; last in {c.names[a]}")
            fire(a, chosen)

    for a in range(n):
        enter(a, c.initial[a])
    settle()
    while timed and hit == math.inf:
        t, a, tok = heappop(timed)
        if tok != token[a]:
            continue
        if t > horizon:
            break
        now = t
        l = loc[a]
        if rate[a][l] is None:
            # guard wake-up of an untimed location
            if not queued[a]:
                queued[a] = True
                heappush(urgent, a)
        else:
            for e in spont[a][l]:
                if e[2] is None or _guard_ok(e[2], now, resets):
                    fire(a, e)
                    break
        settle()
    return hit


def _goal_of(c: _Compiled, target: tuple[int, str]) -> tuple[int, int]:
    ai, lname = target
    return ai, c.loc_names[ai].index(lname)


def simulate_trace(nsta: NSTA, trace_seed: int, horizon: float,
                   goal: tuple[int, str] | None = None) -> Trace:
    """Record one run up to ``horizon`` (or until ``goal`` is entered)."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    c = _Compiled(nsta)
    events: list[TraceEvent] = []
    hit = _run(c, trace_seed & MASK64, horizon, None if goal is None else _goal_of(c, goal), events)
    return Trace(tuple(events), float(horizon), None if hit == math.inf else hit)


_WORKER_CACHE: dict = {}


def _count_chunk(args) -> list[int]:
    nsta, goal, bounds, master, start, stop = args
    key = id(nsta)
    c = _WORKER_CACHE.get(key)
    if c is None or c.nsta is not nsta:
        c = _Compiled(nsta)
        _WORKER_CACHE.clear()
        _WORKER_CACHE[key] = c
    g = _goal_of(c, goal)
    horizon = bounds[-1]
    counts = [0] * len(bounds)
    for i in range(start, stop):
        t = _run(c, trace_seed(master, i), horizon, g)
        if t <= horizon:
            for j, b in enumerate(bounds):
                if t <= b:
                    counts[j] += 1
    return counts


def _chunks(runs: int, workers: int) -> list[tuple[int, int]]:
    k = min(workers, runs)
    edges = [runs * i // k for i in range(k + 1)]
    return [(edges[i], edges[i + 1]) for i in range(k)]


def success_counts(nsta: NSTA, goal: tuple[int, str], bounds: Sequence[float], runs: int,
                   seed: int, workers: int = 1) -> list[int]:
    """Successes at each time bound over traces ``0..runs-1``.

    A single horizon ``max(bounds)`` is simulated per trace; truncating a trace
    earlier never changes what happened before the cut, so the count for each
    bound equals that of a separate run with horizon = bound.
    """
    order = sorted(range(len(bounds)), key=lambda i: bounds[i])
    sb = [float(bounds[i]) for i in order]
    jobs = [(nsta, goal, sb, seed, s, e) for s, e in _chunks(runs, workers)]
    if workers == 1 or len(jobs) == 1:
        parts = [_count_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(_count_chunk, jobs))
    total = [sum(p[j] for p in parts) for j in range(len(sb))]
    out = [0] * len(bounds)
    for j, i in enumerate(order):
        out[i] = total[j]
    return out


def estimate_many(nsta: NSTA, node: str, location: str, bounds: Sequence[float],
                  settings: SmcSettings) -> list[Estimate]:
    """One estimate per time bound, all from the same trace set."""
    if not bounds:
        return []
    if any(not (b > 0) for b in bounds):
        raise QueryError("time bounds must be positive")
    target = SmcQuery(max(bounds), node, location).target(nsta)
    runs = settings.runs
    t0 = time.perf_counter()
    counts = success_counts(nsta, target, bounds, runs, settings.seed, settings.workers)
    wall = time.perf_counter() - t0
    return [Estimate(k / runs, settings.epsilon, runs, k, settings.alpha, settings.seed, wall) for k in counts]


def estimate(nsta: NSTA, query: SmcQuery, settings: SmcSettings) -> Estimate:
    return estimate_many(nsta, query.node, query.location, [query.time_bound], settings)[0]
