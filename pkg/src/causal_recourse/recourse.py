"""CFE-based recourse, CFE-based actions, and recourse through minimal interventions.

Both solvers minimise the same normalised l1 cost

    cost = sum_i |delta_i| / R_i   (+ a flat charge per changed categorical)

over a lattice of action magnitudes (see :mod:`causal_recourse.search`).  The
CFE solver moves features independently (``x_cfe = x_f + delta``); the MINT
solver pushes every candidate action set through the structural
counterfactual before asking the classifier.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .counterfactual import (
    HARD,
    SOFT,
    Intervention,
    InterventionSet,
    compute_counterfactual,
    counterfactual_batch,
    forward_from_noise,
)
from .errors import IndexOutOfSchema, MissingRange, NoSolutionInGrid, ProblemTooLarge, SchemaMismatch
from .feasibility import (
    DECREASE_ONLY,
    INCREASE_ONLY,
    FeasibilitySpec,
    PlausibilitySpec,
    check_action,
    row_feasibility,
)
from .predictors import FAVORABLE, Classifier
from .scm import CausalGraph, StructuralCausalModel, abduct, check_instance, describe_instance
from .search import CHUNK, Axis, grid_search, grid_units, lex_less, point_costs


@dataclass(frozen=True)
class CostConfig:
    ranges: Mapping[str, float]
    categorical_cost: float = 1.0

    def __post_init__(self):
        r = {k: float(v) for k, v in dict(self.ranges).items()}
        bad = [k for k, v in r.items() if not v > 0]
        if bad:
            raise MissingRange(f"ranges must be positive: {bad}")
        object.__setattr__(self, "ranges", r)

    @classmethod
    def from_data(cls, graph: CausalGraph, data: np.ndarray, categorical_cost: float = 1.0) -> "CostConfig":
        data = np.asarray(data, dtype=float)
        ranges = {}
        for j, v in enumerate(graph.variables):
            if not v.is_categorical and np.ptp(data[:, j]) > 0:
                ranges[v.name] = float(np.ptp(data[:, j]))
        return cls(ranges, categorical_cost)

    def range_of(self, name: str) -> float:
        try:
            return self.ranges[name]
        except KeyError:
            raise MissingRange(f"no cost range for {name!r}") from None


@dataclass(frozen=True)
class SearchConfig:
    """Coarse step = ``step_fraction * R_i`` rounded down to 1/2/5 x 10^k (or to the
    variable's resolution); each refinement level divides it by 10."""

    step_fraction: float = 0.01
    refine_levels: int = 2
    max_set_size: int | None = None
    span: float = 1.0  # search |delta_i| <= span * R_i when no box bounds it

    def __post_init__(self):
        if not self.step_fraction > 0 or self.refine_levels < 0 or not self.span > 0:
            raise ValueError("step_fraction > 0, refine_levels >= 0 and span > 0 required")
        if self.max_set_size is not None and self.max_set_size < 1:
            raise ValueError("max_set_size must be >= 1")


@dataclass
class RecourseSolution:
    solver: str
    factual: np.ndarray
    counterfactual: np.ndarray
    cost: float
    achieved: bool
    actions: InterventionSet = field(default_factory=InterventionSet)
    delta: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self, graph: CausalGraph) -> dict:
        out = {
            "solver": self.solver,
            "actions": [
                {"variable": a.variable, "kind": a.kind, "value": _plain(a.value)} for a in self.actions
            ],
            "factual": describe_instance(graph, self.factual),
            "counterfactual": describe_instance(graph, self.counterfactual),
            "cost": self.cost,
            "achieved": self.achieved,
            "metadata": self.metadata,
        }
        if self.delta is not None:
            out["delta"] = {n: float(d) for n, d in zip(graph.names, self.delta)}
        return out


def _plain(v):
    return v if isinstance(v, str) else float(v)


# --- cost ------------------------------------------------------------------

def cost_of(
    changes: InterventionSet | Sequence[float] | np.ndarray,
    factual: Any,
    cfg: CostConfig,
    graph: CausalGraph,
) -> float:
    """Normalised l1 effort of a delta vector or an intervention set."""
    factual = np.asarray(factual, dtype=float)
    total = 0.0
    if isinstance(changes, InterventionSet):
        for a in changes:
            var = graph.schema(a.variable)
            j = graph.index(a.variable)
            target = var.encode(a.value)
            if var.is_categorical:
                total += cfg.categorical_cost if target != factual[j] else 0.0
                continue
            delta = target - factual[j] if a.kind == HARD else target
            if delta != 0:
                total += abs(delta) / cfg.range_of(a.variable)
        return float(total)
    delta = np.asarray(changes, dtype=float)
    if delta.shape != (graph.dim,):
        raise SchemaMismatch(f"delta must have {graph.dim} entries")
    for j, var in enumerate(graph.variables):
        if delta[j] == 0:
            continue
        total += cfg.categorical_cost if var.is_categorical else abs(delta[j]) / cfg.range_of(var.name)
    return float(total)


# --- lattice construction ----------------------------------------------------

def _axis(
    graph: CausalGraph,
    name: str,
    kind: str,
    factual: np.ndarray,
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    cost_cfg: CostConfig,
    search_cfg: SearchConfig,
) -> Axis:
    j = graph.index(name)
    var = graph.variables[j]
    if var.is_categorical:
        values = tuple(int(k - factual[j]) for k in range(len(var.categories)))
        values = tuple(sorted(values, key=lambda v: (v != 0, abs(v), v)))
        return Axis(name, j, kind, True, cost_per_unit=cost_cfg.categorical_cost, values=values)
    R = cost_cfg.range_of(name)
    unit, mults = grid_units(R, search_cfg.step_fraction, search_cfg.refine_levels, var.resolution)
    lo, hi = -search_cfg.span * R, search_cfg.span * R
    if kind == HARD:
        if plaus is not None and name in plaus.bounds:
            blo, bhi = plaus.bounds[name]
            lo, hi = max(lo, blo - factual[j]), min(hi, bhi - factual[j])
        direction = spec.policy(name).direction
        if direction == INCREASE_ONLY:
            lo = max(lo, 0.0)
        elif direction == DECREASE_ONLY:
            hi = min(hi, 0.0)
    return Axis(
        name, j, kind, False,
        unit=unit,
        cost_per_unit=unit / R,
        lo=int(math.ceil(lo / unit - 1e-9)),
        hi=int(math.floor(hi / unit + 1e-9)),
        mults=mults,
    )


def finest_units(graph: CausalGraph, names: Iterable[str], cost_cfg: CostConfig, search_cfg: SearchConfig) -> dict:
    out = {}
    for n in names:
        var = graph.schema(n)
        if not var.is_categorical:
            out[n] = grid_units(cost_cfg.range_of(n), search_cfg.step_fraction,
                                search_cfg.refine_levels, var.resolution)[0]
    return out


def grid_cost_step(graph: CausalGraph, names: Iterable[str], cost_cfg: CostConfig, search_cfg: SearchConfig) -> float:
    """Cost of one finest-lattice step on the coarsest-resolved actionable variable."""
    units = finest_units(graph, names, cost_cfg, search_cfg)
    return max((u / cost_cfg.range_of(n) for n, u in units.items()), default=0.0)


def _values(axes: Sequence[Axis], factual: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Lattice indices -> intervention values (target levels for hard, offsets for soft)."""
    vals = np.empty(pts.shape, dtype=float)
    for d, ax in enumerate(axes):
        step = pts[:, d] * (1.0 if ax.categorical else ax.unit)
        vals[:, d] = factual[ax.column] + step if ax.kind == HARD else step
    return vals


def _to_actions(graph: CausalGraph, axes: Sequence[Axis], values: np.ndarray) -> InterventionSet:
    items = []
    for ax, v in zip(axes, values):
        var = graph.variables[ax.column]
        items.append(Intervention(ax.name, ax.kind, var.decode(v) if var.is_categorical else float(v)))
    return InterventionSet(tuple(items))


def _subsets(names: list[str], max_size: int | None):
    top = len(names) if max_size is None else min(max_size, len(names))
    for k in range(1, top + 1):
        yield from itertools.combinations(names, k)


def _kind_assignments(spec: FeasibilitySpec, graph: CausalGraph, subset):
    options = []
    for n in subset:
        kinds = spec.policy(n).kinds
        if graph.schema(n).is_categorical:
            kinds = tuple(k for k in kinds if k == HARD)
        options.append(kinds)
    return itertools.product(*options)


# --- CFE-based recourse ------------------------------------------------------

def solve_cfe(
    h: Classifier,
    factual: Any,
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    cost_cfg: CostConfig,
    search_cfg: SearchConfig = SearchConfig(),
) -> RecourseSolution:
    """Cheapest independent feature shift ``delta`` with ``h(x_f + delta)`` favorable.

    No causal propagation: only actionable features move, each by its own
    delta, and direction/conditions/box constraints are checked on
    ``x_f + delta`` directly.
    """
    graph = CausalGraph(h.variables, {})
    x = check_instance(graph, factual)
    if h.predict(x) == FAVORABLE:
        return RecourseSolution("cfe", x, x.copy(), 0.0, True, delta=np.zeros_like(x),
                                metadata={"nodes_explored": 0, "note": "factual already favorable"})
    names = spec.actionable(graph)
    best = (math.inf, None, None)
    nodes, best_score, deepest, searched = 0, -math.inf, 0, 0
    for subset in _subsets(names, search_cfg.max_set_size):
        axes = [_axis(graph, n, HARD, x, spec, plaus, cost_cfg, search_cfg) for n in subset]
        cols = [ax.column for ax in axes]

        def evaluate(pts, axes=axes, cols=cols, subset=subset):
            X = np.tile(x, (pts.shape[0], 1))
            X[:, cols] = _values(axes, x, pts)
            return row_feasibility(spec, plaus, graph, x, subset, X), h.decision_function(X)

        out = grid_search(axes, evaluate, best[0])
        searched += 1
        nodes += out.nodes
        best_score = max(best_score, out.best_score)
        deepest = max(deepest, out.deepest_level)
        if out.point is not None and lex_less(out.cost, best[0]):
            best = (out.cost, axes, out.point)
    meta = {"nodes_explored": nodes, "grid_level": deepest, "subsets_searched": searched,
            "finest_units": finest_units(graph, names, cost_cfg, search_cfg)}
    if best[1] is None:
        raise NoSolutionInGrid("no feasible grid point flips the classifier (CFE)",
                               best_gap=-best_score, nodes_explored=nodes)
    _, axes, point = best
    x_cfe = x.copy()
    x_cfe[[ax.column for ax in axes]] = _values(axes, x, point[None, :])[0]
    delta = x_cfe - x
    cost = cost_of(delta, x, cost_cfg, graph)
    return RecourseSolution("cfe", x, x_cfe, cost, h.predict(x_cfe) == FAVORABLE, delta=delta, metadata=meta)


def build_cfe_action(
    delta: Sequence[float],
    factual: Any,
    graph: CausalGraph,
    indices: Iterable[int | str] | None = None,
) -> InterventionSet:
    """Hard interventions ``X_i := x_i + delta_i`` for every ``i`` in ``indices``.

    ``indices`` defaults to the support of ``delta`` and must contain it.
    """
    delta = np.asarray(delta, dtype=float)
    x = np.asarray(factual, dtype=float)
    if delta.shape != (graph.dim,) or x.shape != (graph.dim,):
        raise IndexOutOfSchema(f"delta and factual must have {graph.dim} entries")
    support = {int(j) for j in np.flatnonzero(delta)}
    if indices is None:
        chosen = support
    else:
        chosen = set()
        for i in indices:
            if isinstance(i, str):
                if i not in graph.names:
                    raise IndexOutOfSchema(f"unknown variable {i!r}")
                i = graph.names.index(i)
            if not 0 <= int(i) < graph.dim:
                raise IndexOutOfSchema(f"index {i} outside schema of size {graph.dim}")
            chosen.add(int(i))
        if not support <= chosen:
            raise IndexOutOfSchema("intervened indices must include every nonzero delta")
    items = []
    for j in sorted(chosen):
        var = graph.variables[j]
        target = x[j] + delta[j]
        items.append(Intervention(var.name, HARD, var.decode(target) if var.is_categorical else float(target)))
    return InterventionSet(tuple(items))


# --- recourse through minimal interventions ----------------------------------

def verify_recourse(model: StructuralCausalModel, h: Classifier, factual: Any, actions: InterventionSet) -> bool:
    return h.predict(compute_counterfactual(model, factual, actions).counterfactual) == FAVORABLE


def _mint_setup(model, h, factual, spec):
    if tuple(h.variables) != tuple(model.variables):
        raise SchemaMismatch("classifier and model schemas differ")
    spec.validate_against(model.graph)
    return check_instance(model.graph, factual)


def _empty_solution(solver, x):
    return RecourseSolution(solver, x, x.copy(), 0.0, True,
                            metadata={"nodes_explored": 0, "note": "factual already favorable"})


def solve_mint(
    model: StructuralCausalModel,
    h: Classifier,
    factual: Any,
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    cost_cfg: CostConfig,
    search_cfg: SearchConfig = SearchConfig(),
) -> RecourseSolution:
    """Minimum-cost feasible intervention set whose structural counterfactual is favorable.

    Subsets of actionable variables are visited by size, then in schema
    order; a later candidate replaces the incumbent only if strictly cheaper,
    which implements the (cost, size, lexicographic) tie-break.
    """
    graph = model.graph
    x = _mint_setup(model, h, factual, spec)
    if h.predict(x) == FAVORABLE:
        return _empty_solution("mint", x)
    names = spec.actionable(graph)
    best = (math.inf, None, None)
    nodes, best_score, deepest, searched = 0, -math.inf, 0, 0
    for subset in _subsets(names, search_cfg.max_set_size):
        for kinds in _kind_assignments(spec, graph, subset):
            axes = [_axis(graph, n, k, x, spec, plaus, cost_cfg, search_cfg) for n, k in zip(subset, kinds)]
            cols = [ax.column for ax in axes]

            def evaluate(pts, axes=axes, cols=cols, kinds=kinds, subset=subset):
                X = counterfactual_batch(model, x, cols, kinds, _values(axes, x, pts))
                return row_feasibility(spec, plaus, graph, x, subset, X), h.decision_function(X)

            out = grid_search(axes, evaluate, best[0])
            searched += 1
            nodes += out.nodes
            best_score = max(best_score, out.best_score)
            deepest = max(deepest, out.deepest_level)
            if out.point is not None and lex_less(out.cost, best[0]):
                best = (out.cost, axes, out.point)
    meta = {"nodes_explored": nodes, "grid_level": deepest, "subsets_searched": searched,
            "finest_units": finest_units(graph, names, cost_cfg, search_cfg)}
    if best[1] is None:
        raise NoSolutionInGrid("no feasible intervention set flips the classifier (MINT)",
                               best_gap=-best_score, nodes_explored=nodes)
    return _finish("mint", model, h, x, spec, plaus, cost_cfg, best, meta)


def _finish(solver, model, h, x, spec, plaus, cost_cfg, best, meta):
    _, axes, point = best
    actions = _to_actions(model.graph, axes, _values(axes, x, point[None, :])[0])
    res = compute_counterfactual(model, x, actions)
    verdict = check_action(spec, plaus, model.graph, x, actions, res.counterfactual)
    achieved = h.predict(res.counterfactual) == FAVORABLE
    if not (verdict.ok and achieved):
        # the lattice evaluation and the scalar re-check disagree only on float ties
        meta["recheck"] = {"feasible": verdict.ok, "achieved": achieved,
                           "violations": [v.kind for v in verdict.violations]}
    return RecourseSolution(solver, x, res.counterfactual, cost_of(actions, x, cost_cfg, model.graph),
                            achieved and verdict.ok, actions=actions, metadata=meta)


def brute_force_oracle(
    model: StructuralCausalModel,
    h: Classifier,
    factual: Any,
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    cost_cfg: CostConfig,
    search_cfg: SearchConfig = SearchConfig(),
    *,
    max_points: int = 20_000_000,
) -> RecourseSolution:
    """Exhaustive MINT over the full finest lattice, for verification only.

    Every lattice point of every (subset, kinds) pair is evaluated; the
    counterfactual is computed by re-running the rewritten equations from
    the abducted noise instead of the difference form the solver uses.
    """
    graph = model.graph
    x = _mint_setup(model, h, factual, spec)
    if graph.dim > 4:
        raise ProblemTooLarge("oracle supports at most 4 variables")
    if h.predict(x) == FAVORABLE:
        return _empty_solution("oracle", x)
    u = abduct(model, x)
    names = spec.actionable(graph)
    plan = []
    for subset in _subsets(names, search_cfg.max_set_size):
        for kinds in _kind_assignments(spec, graph, subset):
            axes = [_axis(graph, n, k, x, spec, plaus, cost_cfg, search_cfg) for n, k in zip(subset, kinds)]
            plan.append((subset, kinds, axes))
    total = sum(math.prod(ax.size() for ax in axes) for *_, axes in plan)
    if total > max_points:
        raise ProblemTooLarge(f"oracle would enumerate {total} points (limit {max_points})")

    best = (math.inf, None, None)
    best_score = -math.inf
    for subset, kinds, axes in plan:
        grids = [ax.lattice(len(ax.mults) - 1) if not ax.categorical else np.array(ax.values) for ax in axes]
        if any(g.size == 0 for g in grids):
            continue
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(axes))
        cols = [ax.column for ax in axes]
        for s in range(0, mesh.shape[0], CHUNK):
            pts = mesh[s:s + CHUNK]
            X = forward_from_noise(model, u, cols, kinds, _values(axes, x, pts))
            feasible = row_feasibility(spec, plaus, graph, x, subset, X)
            score = h.decision_function(X)
            ok = feasible & (score >= 0)
            if np.any(feasible & ~ok):
                best_score = max(best_score, float(score[feasible & ~ok].max()))
            if ok.any():
                costs = point_costs(axes, pts[ok])
                k = int(np.argmin(costs))
                if lex_less(costs[k], best[0]):
                    best = (float(costs[k]), axes, pts[ok][k])
    meta = {"nodes_explored": total, "grid_level": search_cfg.refine_levels, "subsets_searched": len(plan)}
    if best[1] is None:
        raise NoSolutionInGrid("no lattice point flips the classifier (oracle)",
                               best_gap=-best_score, nodes_explored=total)
    return _finish("oracle", model, h, x, spec, plaus, cost_cfg, best, meta)
