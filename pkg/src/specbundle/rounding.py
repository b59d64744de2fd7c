"""Combinatorial rounding of reconstructed primal factors.

Cut rounding takes signs of the factor columns and keeps the heaviest cut;
assignment rounding reshapes each column into a square block, projects it
onto permutations by maximum linear alignment, and keeps the permutation
with the best objective.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .problem import GraphInstance, QapInstance

__all__ = ["CutResult", "PermResult", "maxcut_round", "hungarian", "qap_round", "GapTracker"]


@dataclass
class CutResult:
    assignment: np.ndarray  # entries in {-1, +1}
    value: float


@dataclass
class PermResult:
    perm: np.ndarray
    objective: float
    relative_gap: Optional[float] = None


def maxcut_round(u: np.ndarray, g: GraphInstance) -> CutResult:
    """Evaluate the sign cut of every factor column and keep the largest.

    Zero entries sign to +1 to keep runs deterministic.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.ndim != 2 or u.shape[0] != g.n or u.shape[1] == 0:
        raise ValueError("factor must be a nonempty n x r matrix")
    lap = g.laplacian()
    best_x: np.ndarray | None = None
    best_val = -np.inf
    for j in range(u.shape[1]):
        x = np.where(u[:, j] >= 0.0, 1.0, -1.0)
        val = 0.25 * float(x @ (lap @ x))
        if val > best_val:
            best_val = val
            best_x = x
    return CutResult(assignment=best_x.astype(int), value=best_val)


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Permutation p minimizing sum_i cost[i, p[i]]; deterministic under ties."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def assignment_objective(q: QapInstance, perm: np.ndarray) -> float:
    d_p = q.distances[np.ix_(perm, perm)]
    return float(np.sum(q.weights * d_p))


def qap_round(u: np.ndarray, q: QapInstance, known_optimum: Optional[float] = None) -> PermResult:
    """Round each factor column to a permutation and keep the best objective.

    Columns drop the leading affine entry, reshape column-major into a
    square block, and are projected onto permutations by maximizing the
    linear alignment (assignment on the negated block).
    """
    n = q.size
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] != n * n + 1:
        raise ValueError(f"factor must have {n * n + 1} rows")
    best: PermResult | None = None
    for j in range(u.shape[1]):
        block = u[1:, j].reshape(n, n, order="F")
        perm = hungarian(-block)
        obj = assignment_objective(q, perm)
        if best is None or obj < best.objective:
            best = PermResult(perm=perm, objective=obj)
    opt = known_optimum if known_optimum is not None else q.known_optimum
    if opt is not None and opt != 0:
        best.relative_gap = (best.objective - opt) / opt
    return best


class GapTracker:
    """Running minimum over a stream of rounding results."""

    def __init__(self):
        self.best: Optional[float] = None

    def update(self, gap: float | PermResult) -> float:
        value = gap.relative_gap if isinstance(gap, PermResult) else float(gap)
        if value is None:
            raise ValueError("result carries no relative gap")
        if self.best is None or value < self.best:
            self.best = value
        return self.best
