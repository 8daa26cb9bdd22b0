"""Cost-ordered multiresolution grid search over action magnitudes.

All arithmetic is done on integer lattice indices at the finest resolution:
axis ``d`` moves its variable by ``index * unit``.  Level ``L`` only visits
multiples of ``mults[L]`` (plus the bound endpoints), so every coarse point is
also a fine point and refinement never leaves the finest lattice.

The search is exact on the coarse lattice and branch-and-bound below it:
a coarse cell is refined only if one of its corners satisfies every
constraint and its cheapest point could beat the incumbent.  Thin feasible
slivers that touch no visited corner can be missed; the brute-force oracle in
:mod:`causal_recourse.recourse` exists to measure that.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

# evaluate(points) -> (constraint mask excluding h, decision score)
Evaluator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

CHUNK = 400_000


def nice_floor(x: float) -> float:
    """Largest number of the form {1, 2, 5} * 10**k that is <= x."""
    e = math.floor(math.log10(x))
    for f in (5.0, 2.0, 1.0):
        step = f * 10.0**e
        if step <= x * (1 + 1e-12):
            return step
    return 10.0 ** (e - 1) * 5.0


def grid_units(span: float, fraction: float, levels: int, resolution: float | None) -> tuple[float, tuple[int, ...]]:
    """Finest unit and per-level lattice multipliers for one numeric variable."""
    target = fraction * span
    if resolution is None:
        coarse = nice_floor(target)
        unit = coarse / 10.0**levels
    else:
        j = max(0, math.floor(math.log10(target / resolution) + 1e-12)) if target > resolution else 0
        coarse = resolution * 10.0**j
        unit = resolution * 10.0 ** max(0, j - levels)
    mults = tuple(max(1, int(round(max(coarse / 10.0**lv, unit) / unit))) for lv in range(levels + 1))
    return unit, mults


def lex_less(a: float, b: float) -> bool:
    """``a`` is strictly cheaper than ``b`` beyond float noise."""
    if math.isinf(b):
        return a < b
    return a < b - 1e-12 * max(1.0, abs(b))


@dataclass
class Axis:
    name: str
    column: int
    kind: str
    categorical: bool
    unit: float = 1.0
    cost_per_unit: float = 0.0
    lo: int = 0
    hi: int = 0
    mults: tuple[int, ...] = (1,)
    values: tuple[int, ...] = ()

    def lattice(self, level: int, a: int | None = None, b: int | None = None) -> np.ndarray:
        if self.categorical:
            return np.array(self.values if a is None else [a], dtype=np.int64)
        a = self.lo if a is None else a
        b = self.hi if b is None else b
        if a > b:
            return np.zeros(0, dtype=np.int64)
        m = self.mults[min(level, len(self.mults) - 1)]
        first = -((-a) // m) * m
        pts = np.arange(first, b + 1, m, dtype=np.int64)
        return np.unique(np.concatenate([[a, b], pts]))

    def costs(self, idx: np.ndarray) -> np.ndarray:
        if self.categorical:
            return np.where(idx != 0, self.cost_per_unit, 0.0)
        return np.abs(idx) * self.cost_per_unit

    def interval_lb(self, a: int, b: int) -> float:
        if self.categorical:
            return self.cost_per_unit if a != 0 else 0.0
        if a <= 0 <= b:
            return 0.0
        return min(abs(a), abs(b)) * self.cost_per_unit

    def size(self) -> int:
        return len(self.values) if self.categorical else max(0, self.hi - self.lo + 1)


def point_costs(axes: list[Axis], pts: np.ndarray) -> np.ndarray:
    total = np.zeros(pts.shape[0])
    for d, ax in enumerate(axes):
        total += ax.costs(pts[:, d])
    return total


@dataclass
class SearchOutcome:
    cost: float = math.inf
    point: np.ndarray | None = None
    nodes: int = 0
    best_score: float = -math.inf
    deepest_level: int = 0


class _Tracker:
    def __init__(self, axes, evaluate, budget):
        self.axes = axes
        self.evaluate = evaluate
        self.out = SearchOutcome(cost=budget)

    def run(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate ``pts``; return the mask of points that satisfy everything."""
        if pts.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        feasible, score = self.evaluate(pts)
        ok = feasible & (score >= 0)
        self.out.nodes += pts.shape[0]
        if np.any(feasible & ~ok):
            self.out.best_score = max(self.out.best_score, float(score[feasible & ~ok].max()))
        if ok.any():
            costs = point_costs(self.axes, pts[ok])
            k = int(np.argmin(costs))
            if lex_less(costs[k], self.out.cost):
                self.out.cost = float(costs[k])
                self.out.point = pts[ok][k].copy()
        return ok


def _product(lists: list[np.ndarray]) -> np.ndarray:
    """Cartesian product as rows, last axis varying fastest."""
    grids = np.meshgrid(*lists, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64, copy=False)


def _pruned_product(lists, costs, lo, hi):
    """Lattice points with ``lo < cost <= hi`` in chunks, cheapest first axis value first."""
    order = np.argsort(costs[0], kind="stable")
    for i in order:
        c0 = costs[0][i]
        if c0 > hi:
            break
        pts = np.array([[lists[0][i]]], dtype=np.int64)
        pc = np.array([c0])
        for d in range(1, len(lists)):
            keep = pc[:, None] + costs[d][None, :] <= hi
            ii, jj = np.nonzero(keep)
            pts = np.column_stack([pts[ii], lists[d][jj]])
            pc = pc[ii] + costs[d][jj]
            if pts.shape[0] == 0:
                break
        if pts.shape[0] == 0:
            continue
        sel = pc > lo
        for s in range(0, int(sel.sum()), CHUNK):
            yield pts[sel][s:s + CHUNK]


def grid_search(axes: list[Axis], evaluate: Evaluator, budget: float = math.inf) -> SearchOutcome:
    """Cheapest lattice point passing ``evaluate`` and strictly cheaper than ``budget``."""
    tr = _Tracker(axes, evaluate, budget)
    if any(ax.size() == 0 for ax in axes):
        return tr.out
    levels = max(len(ax.mults) for ax in axes)
    lists = [ax.lattice(0) for ax in axes]
    costs = [ax.costs(v) for ax, v in zip(axes, lists)]
    def cell_cost(level):
        # cost span of one cell at ``level``; a corner dearer than incumbent + this bounds nothing useful
        return sum(ax.cost_per_unit if ax.categorical else ax.mults[min(level, len(ax.mults) - 1)] * ax.cost_per_unit
                   for ax in axes)

    def promising(pts, level):
        return pts[point_costs(axes, pts) < tr.out.cost + cell_cost(level)]

    coarse_step = cell_cost(0)
    feasible_pts: list[np.ndarray] = []

    # coarse lattice in geometrically growing cost bands, stopping once the
    # incumbent is known and one cell's worth of margin past it is covered
    band = max(min((c[c > 0].min() if np.any(c > 0) else 0.0) for c in costs), 1e-12) * 4
    lo = -1.0
    while True:
        limit = tr.out.cost + coarse_step if math.isfinite(tr.out.cost) else math.inf
        hi = min(band, limit)
        for pts in _pruned_product(lists, costs, lo, hi):
            ok = tr.run(pts)
            if ok.any():
                feasible_pts.append(pts[ok])
        if hi >= limit or hi >= sum(c.max() for c in costs):
            break
        lo, band = hi, band * 2

    if levels == 1 or not feasible_pts:
        return tr.out

    heap: list = []
    seen: set = set()
    counter = itertools.count()

    def push_cells(corners: np.ndarray, level: int, within=None):
        for p in corners:
            spans = []
            for d, ax in enumerate(axes):
                if ax.categorical:
                    spans.append([(int(p[d]), int(p[d]))])
                    continue
                grid = lists[d] if within is None else ax.lattice(level, *within[d])
                k = int(np.searchsorted(grid, p[d]))
                opts = []
                if k > 0:
                    opts.append((int(grid[k - 1]), int(p[d])))
                if k + 1 < len(grid):
                    opts.append((int(p[d]), int(grid[k + 1])))
                spans.append(opts or [(int(p[d]), int(p[d]))])
            for cell in itertools.product(*spans):
                key = (level, cell)
                if key in seen:
                    continue
                seen.add(key)
                lb = sum(ax.interval_lb(a, b) for ax, (a, b) in zip(axes, cell))
                if lex_less(lb, tr.out.cost):
                    heapq.heappush(heap, (lb, next(counter), level, cell))

    push_cells(promising(np.concatenate(feasible_pts), 0), 0)
    while heap:
        lb, _, level, cell = heapq.heappop(heap)
        if not lex_less(lb, tr.out.cost):
            break
        sub = [ax.lattice(level + 1, a, b) for ax, (a, b) in zip(axes, cell)]
        pts = _product(sub)
        # points that can neither beat the incumbent nor seed a useful finer cell are never evaluated
        pts = promising(pts, level + 1) if level + 2 < levels else pts[point_costs(axes, pts) < tr.out.cost]
        ok = tr.run(pts)
        tr.out.deepest_level = max(tr.out.deepest_level, level + 1)
        if level + 2 < levels and ok.any():
            push_cells(promising(pts[ok], level + 1), level + 1, within=cell)
    return tr.out
