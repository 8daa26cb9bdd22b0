"""Random recourse problems shared by the property and acceptance suites."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from causal_recourse.feasibility import (
    ACTIONABLE,
    DIRECTIONS,
    IMMUTABLE,
    NON_ACTIONABLE,
    FeasibilitySpec,
    PlausibilitySpec,
    VariablePolicy,
    ancestral_closure,
)
from causal_recourse.predictors import SignLinear
from causal_recourse.recourse import CostConfig
from causal_recourse.scm import (
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    sample,
)


@dataclass
class Problem:
    model: StructuralCausalModel
    h: SignLinear
    factual: np.ndarray
    spec: FeasibilitySpec
    plaus: PlausibilitySpec | None
    cost_cfg: CostConfig
    data: np.ndarray


def random_model(rng: np.random.Generator, d: int, structure: str = "random") -> StructuralCausalModel:
    """Linear gaussian SCM over X0..X{d-1} with edges only from lower to higher index.

    ``structure``: "random" (each edge with prob 1/2), "independent" (no
    edges) or "dense" (every edge, weights bounded away from zero).
    """
    names = [f"X{i}" for i in range(d)]
    parents, equations = {}, {}
    for j, n in enumerate(names):
        if structure == "independent":
            pa = []
        elif structure == "dense":
            pa = names[:j]
        else:
            pa = [names[i] for i in range(j) if rng.random() < 0.5]
        weights = {}
        for p in pa:
            w = rng.uniform(0.3, 1.5) * rng.choice([-1.0, 1.0])
            weights[p] = float(w)
        parents[n] = tuple(pa)
        noise = NoiseSpec.gaussian(float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2.0)))
        equations[n] = StructuralEquation(weights, 0.0, noise, form="linear" if pa else "constant")
    graph = CausalGraph(tuple(VariableSchema(n) for n in names), parents)
    return StructuralCausalModel(graph, equations)


def random_problem(
    seed: int,
    dims=(2, 3, 4),
    structure: str = "random",
    feasibility: bool = True,
    plausibility: bool = True,
    n_ref: int = 300,
) -> Problem:
    rng = np.random.default_rng(seed)
    d = int(rng.choice(dims))
    model = random_model(rng, d, structure)
    data = sample(model, n_ref, seed)
    w = rng.normal(size=d)
    scores = data @ w
    # a threshold with roughly a third of the reference population favorable
    bias = -float(np.quantile(scores, rng.uniform(0.55, 0.8)))
    h = SignLinear(model.variables, w, bias)
    unfavorable = np.flatnonzero(scores + bias < 0)
    factual = data[int(rng.choice(unfavorable))].copy()
    policies = {}
    if feasibility:
        for n in model.names:
            cls = rng.choice([ACTIONABLE, ACTIONABLE, ACTIONABLE, NON_ACTIONABLE, IMMUTABLE])
            direction = rng.choice(DIRECTIONS) if cls == ACTIONABLE else "any"
            policies[n] = VariablePolicy(str(cls), str(direction))
        if not any(p.actionability == ACTIONABLE for p in policies.values()):
            policies[model.names[-1]] = VariablePolicy(ACTIONABLE)
    spec = ancestral_closure(FeasibilitySpec(policies), model.graph)
    plaus = PlausibilitySpec.from_data(model.graph, data) if plausibility else None
    return Problem(model, h, factual, spec, plaus, CostConfig.from_data(model.graph, data), data)
