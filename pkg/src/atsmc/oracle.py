"""Analytic top-event CDFs by bottom-up propagation on a time grid.

Completion time of a leaf is Exp(rate); OR is the minimum of its children,
AND the maximum, SAND the sum. With independent children (no shared
subtrees) the first two are products of CDFs; the sum is a Stieltjes
convolution evaluated with the trapezoidal rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import AttackTree, GateKind, require_valid

DEFAULT_STEP = 0.1


class OracleError(ValueError):
    pass


class SharedSubtreeError(OracleError):
    """The product/convolution rules need independent children; use SMC instead."""


@dataclass(frozen=True)
class CdfGrid:
    step: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.step

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) * self.step

    def at(self, t: float) -> float:
        if t < 0:
            raise ValueError("time must be >= 0")
        if t > self.horizon * (1 + 1e-12):
            raise ValueError(f"time {t} beyond grid horizon {self.horizon}")
        return float(np.interp(t, self.times, self.values))


def sum_cdf(fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """CDF of X + Y on a shared grid from the CDFs of independent X, Y >= 0.

    F(t_m) = sum_j (F_Y(s_j) - F_Y(s_{j-1})) * (F_X(t_m - s_j) + F_X(t_m - s_{j-1})) / 2
    """
    m = len(fx)
    dy = np.diff(fy)
    avg = 0.5 * (fx[:-1] + fx[1:])
    out = np.empty(m)
    out[0] = fx[0] * fy[0]
    out[1:] = np.convolve(dy, avg)[: m - 1] + fy[0] * fx[1:]
    return np.clip(out, 0.0, 1.0)


def _grid_len(horizon: float, step: float) -> int:
    return int(math.ceil(horizon / step - 1e-9)) + 1


def node_cdf(tree: AttackTree, node: str, horizon: float, step: float = DEFAULT_STEP) -> CdfGrid:
    require_valid(tree)
    if node not in tree.nodes:
        raise OracleError(f"unknown node {node!r}")
    if not step > 0:
        raise OracleError("step must be positive")
    if horizon <= 0 or step > horizon / 10:
        raise OracleError(f"step {step} too coarse for horizon {horizon} (need step <= horizon/10)")
    below = tree.descendants(node)
    parents = tree.parents()
    inside = set(below)
    shared = [n for n in below if n != node and sum(p in inside for p in parents[n]) > 1]
    if shared:
        raise SharedSubtreeError(f"shared subtree(s) {shared} below {node!r}; use SMC for this model")

    t = np.arange(_grid_len(horizon, step)) * step
    cache: dict[str, np.ndarray] = {}
    for nid in reversed(below):  # children before parents
        n = tree.nodes[nid]
        if n.is_leaf:
            cache[nid] = -np.expm1(-n.rate * t)
            continue
        kids = [cache[c] for c in n.children]
        if n.gate is GateKind.OR:
            surv = np.ones_like(t)
            for f in kids:
                surv = surv * (1.0 - f)
            cache[nid] = 1.0 - surv
        elif n.gate is GateKind.AND:
            f = np.ones_like(t)
            for g in kids:
                f = f * g
            cache[nid] = f
        else:
            f = kids[0]
            for g in kids[1:]:
                f = sum_cdf(f, g)
            cache[nid] = f
    return CdfGrid(step, cache[node])


def top_curve(tree: AttackTree, times: Sequence[float], step: float = DEFAULT_STEP,
              node: str | None = None) -> list[tuple[float, float]]:
    times = list(times)
    if not times:
        return []
    horizon = max(times)
    if horizon <= 0:
        return [(float(x), 0.0) for x in times]
    grid = node_cdf(tree, tree.top_event if node is None else node, horizon, step)
    return [(float(x), grid.at(x)) for x in times]
