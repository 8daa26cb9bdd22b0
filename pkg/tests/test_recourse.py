import math

import numpy as np
import pytest

from causal_recourse.counterfactual import HARD, SOFT, Intervention, InterventionSet, compute_counterfactual
from causal_recourse.errors import IndexOutOfSchema, MissingRange, NoSolutionInGrid, ProblemTooLarge
from causal_recourse.experiments import german_feasibility, german_graph, german_truth_model
from causal_recourse.feasibility import (
    ACTIONABLE,
    IMMUTABLE,
    FeasibilitySpec,
    PlausibilitySpec,
    VariablePolicy,
    check_action,
)
from causal_recourse.predictors import FAVORABLE, SignLinear
from causal_recourse.recourse import (
    CostConfig,
    SearchConfig,
    brute_force_oracle,
    build_cfe_action,
    cost_of,
    finest_units,
    grid_cost_step,
    solve_cfe,
    solve_mint,
    verify_recourse,
)
from causal_recourse.scm import (
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    make_instance,
    sample,
)
from causal_recourse.search import grid_units, nice_floor

from problems import random_problem

# ranges of the public credit data set (age 19..75, credit amount 250..18424)
CREDIT_RANGES = {"age": 56.0, "credit": 18174.0, "duration": 68.0}


@pytest.fixture(scope="module")
def loan_setup():
    from causal_recourse.experiments import synthetic_classifier, synthetic_model

    model = synthetic_model()
    data = sample(model, 10000, seed=0)
    return (model, synthetic_classifier(model), CostConfig.from_data(model.graph, data),
            PlausibilitySpec.from_data(model.graph, data))


# --- cost ----------------------------------------------------------------------------

def test_cost_formula():
    g = CausalGraph((VariableSchema("X1"), VariableSchema("X2")), {})
    cfg = CostConfig({"X1": 50000, "X2": 20000})
    assert cost_of([0, 5000], [75000, 25000], cfg, g) == pytest.approx(0.25)
    assert cost_of(InterventionSet(), [75000, 25000], cfg, g) == 0
    assert cost_of(InterventionSet.hard({"X1": 75000}), [75000, 25000], cfg, g) == 0
    soft = InterventionSet((Intervention("X2", SOFT, -4000),))
    assert cost_of(soft, [75000, 25000], cfg, g) == pytest.approx(0.2)


def test_cost_reference_decrease():
    g = german_graph()
    x = make_instance(g, ("Male", 32, 1938, 24))
    cfg = CostConfig(CREDIT_RANGES)
    cfe_action = cost_of(InterventionSet.hard({"age": 38}), x, cfg, g)
    mint = cost_of(InterventionSet.hard({"age": 33, "credit": 1138}), x, cfg, g)
    assert mint == pytest.approx(1 / 56 + 800 / 18174, abs=1e-12)
    assert cfe_action == pytest.approx(6 / 56, abs=1e-12)
    assert 1 - mint / cfe_action == pytest.approx(0.42, abs=0.005)


def test_categorical_change_cost():
    g = german_graph()
    x = make_instance(g, ("Male", 32, 1938, 24))
    cfg = CostConfig(CREDIT_RANGES, categorical_cost=0.7)
    assert cost_of(InterventionSet.hard({"gender": "Female"}), x, cfg, g) == 0.7
    assert cost_of(InterventionSet.hard({"gender": "Male"}), x, cfg, g) == 0


def test_missing_range():
    g = CausalGraph((VariableSchema("X1"), VariableSchema("X2")), {})
    with pytest.raises(MissingRange):
        cost_of([1, 0], [0, 0], CostConfig({"X2": 1}), g)
    with pytest.raises(MissingRange):
        CostConfig({"X1": 0.0})


# --- grid ---------------------------------------------------------------------------

def test_nice_steps():
    assert nice_floor(1900) == 1000
    assert nice_floor(250) == 200
    assert nice_floor(0.07) == pytest.approx(0.05)
    unit, mults = grid_units(190000, 0.01, 2, None)
    assert unit == pytest.approx(10) and mults == (100, 10, 1)
    unit, mults = grid_units(30, 0.01, 2, 1.0)
    assert unit == 1 and mults == (1, 1, 1)


# --- CFE ------------------------------------------------------------------------------

def test_cfe_loan_world(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    sol = solve_cfe(h, loan_factual, FeasibilitySpec(), plaus, cost_cfg)
    step = finest_units(model.graph, ["X1", "X2"], cost_cfg, SearchConfig())
    assert abs(sol.delta[0]) <= step["X1"]
    assert abs(sol.delta[1] - 5000) <= step["X2"]
    np.testing.assert_allclose(sol.counterfactual, [75000, 30000], atol=step["X2"])
    assert sol.achieved and sol.cost == pytest.approx(cost_of(sol.delta, loan_factual, cost_cfg, model.graph))


def test_cfe_already_favorable(loan_setup):
    _, h, cost_cfg, plaus = loan_setup
    sol = solve_cfe(h, [100000, 30000], FeasibilitySpec(), plaus, cost_cfg)
    assert sol.cost == 0 and not sol.delta.any() and sol.achieved


def test_cfe_credit_world_age_only():
    # a rule under which six more years is the cheapest independent change
    g = german_graph()
    h = SignLinear(g.variables, [0.0, 1.0, -0.001, -0.2], -30.762)
    x = make_instance(g, ("Male", 32, 1938, 24))
    sol = solve_cfe(h, x, german_feasibility(), None, CostConfig(CREDIT_RANGES))
    np.testing.assert_allclose(sol.delta, [0, 6, 0, 0], atol=1e-9)
    assert sol.counterfactual.tolist() == [0, 38, 1938, 24]


def test_cfe_no_solution_reports_gap(loan_setup, loan_factual):
    _, h, cost_cfg, _ = loan_setup
    box = PlausibilitySpec({"X1": (0, 76000), "X2": (0, 25500)})
    with pytest.raises(NoSolutionInGrid) as info:
        solve_cfe(h, loan_factual, FeasibilitySpec(), box, cost_cfg)
    assert 0 < info.value.best_gap < 25000 and info.value.nodes_explored > 0


# --- CFE-based actions ----------------------------------------------------------------

def test_build_cfe_action():
    g = CausalGraph((VariableSchema("X1"), VariableSchema("X2")), {"X2": ("X1",)})
    x = [75000.0, 25000.0]
    assert build_cfe_action([0, 5000], x, g) == InterventionSet.hard({"X2": 30000.0})
    assert len(build_cfe_action([0, 0], x, g, indices=[])) == 0
    assert build_cfe_action([10000, 0], x, g, indices=[0, 1]) == InterventionSet.hard({"X1": 85000.0, "X2": 25000.0})
    with pytest.raises(IndexOutOfSchema):
        build_cfe_action([10000, 0], x, g, indices=[1])
    with pytest.raises(IndexOutOfSchema):
        build_cfe_action([0, 0], x, g, indices=[5])


def test_verify_recourse(loan_model, loan_h, loan_factual):
    assert verify_recourse(loan_model, loan_h, loan_factual, InterventionSet.hard({"X1": 85000}))
    assert not verify_recourse(loan_model, loan_h, loan_factual, InterventionSet())
    # X2 is a leaf: the CFE-based action lands exactly on the CFE
    assert verify_recourse(loan_model, loan_h, loan_factual, InterventionSet.hard({"X2": 30000}))


def test_cfe_action_on_non_leaf_can_fail(loan_model, loan_factual):
    # raising X1 also raises X2, which this rule penalises
    h = SignLinear(loan_model.variables, [1.0, -4.0], 0.0)
    spec = FeasibilitySpec({"X2": VariablePolicy("mutable_non_actionable")})
    cost_cfg = CostConfig({"X1": 190000, "X2": 60000})
    cfe = solve_cfe(h, loan_factual, spec, None, cost_cfg)
    assert cfe.achieved and cfe.delta[0] > 0
    action = build_cfe_action(cfe.delta, loan_factual, loan_model.graph)
    assert not verify_recourse(loan_model, h, loan_factual, action)


# --- MINT ---------------------------------------------------------------------------------

def test_mint_loan_world(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    sol = solve_mint(model, h, loan_factual, FeasibilitySpec(), plaus, cost_cfg)
    step = finest_units(model.graph, ["X1", "X2"], cost_cfg, SearchConfig())
    assert [a.variable for a in sol.actions] == ["X1"]
    assert abs(sol.actions.interventions[0].value - 85000) <= step["X1"]
    np.testing.assert_allclose(sol.counterfactual, [85000, 28000], atol=1e-6)
    cfe = solve_cfe(h, loan_factual, FeasibilitySpec(), plaus, cost_cfg)
    assert 1.4 <= cfe.cost / sol.cost <= 2.6
    assert sol.metadata["nodes_explored"] > 0 and "grid_level" in sol.metadata


def test_mint_soft_only(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    spec = FeasibilitySpec({n: VariablePolicy(ACTIONABLE, kinds=(SOFT,)) for n in ("X1", "X2")})
    sol = solve_mint(model, h, loan_factual, spec, plaus, cost_cfg)
    assert sol.actions.interventions[0].kind == SOFT
    np.testing.assert_allclose(sol.counterfactual, [85000, 28000], atol=1e-6)


def test_mint_independent_roots_match_cfe():
    g = CausalGraph((VariableSchema("A"), VariableSchema("B")), {})
    model = StructuralCausalModel(g, {n: StructuralEquation({}, 0, NoiseSpec.gaussian(0, 1), form="constant")
                                      for n in "AB"})
    h = SignLinear(g.variables, [0.7, 1.3], -1.0)
    x = np.array([-0.4, 0.1])
    cfg, spec = CostConfig({"A": 6.0, "B": 5.0}), FeasibilitySpec()
    mint = solve_mint(model, h, x, spec, None, cfg)
    cfe = solve_cfe(h, x, spec, None, cfg)
    assert abs(mint.cost - cfe.cost) <= grid_cost_step(g, ["A", "B"], cfg, SearchConfig())


def test_tie_break_prefers_first_variable():
    g = CausalGraph((VariableSchema("A"), VariableSchema("B")), {})
    model = StructuralCausalModel(g, {n: StructuralEquation({}, 0, NoiseSpec.gaussian(0, 1), form="constant")
                                      for n in "AB"})
    h = SignLinear(g.variables, [1.0, 1.0], -1.0)
    sol = solve_mint(model, h, [0.0, 0.0], FeasibilitySpec(), None, CostConfig({"A": 4.0, "B": 4.0}))
    assert sol.actions == InterventionSet.hard({"A": 1.0})


def test_mint_respects_feasibility(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    spec = FeasibilitySpec({"X1": VariablePolicy(IMMUTABLE)})
    sol = solve_mint(model, h, loan_factual, spec, plaus, cost_cfg)
    assert sol.actions.variables == ["X2"]
    assert check_action(spec, plaus, model.graph, loan_factual, sol.actions, sol.counterfactual).ok


def test_mint_german_truth_structure():
    model = german_truth_model()
    g = model.graph
    h = SignLinear(g.variables, [0.0, 0.15, -0.0006, -0.08], -0.9)
    x = make_instance(g, ("Male", 32, 1938, 24))
    data = sample(model, 2000, seed=0)
    sol = solve_mint(model, h, x, german_feasibility(), PlausibilitySpec.from_data(g, data),
                     CostConfig.from_data(g, data))
    assert sol.achieved and set(sol.actions.variables) <= {"age", "credit"}


def test_shrinking_actionable_set_never_helps():
    checked = 0
    for seed in range(40):
        p = random_problem(seed, dims=(2, 3), feasibility=False)
        g = p.model.graph
        cfg = SearchConfig(step_fraction=0.05, refine_levels=1)
        try:
            full = solve_mint(p.model, p.h, p.factual, p.spec, p.plaus, p.cost_cfg, cfg).cost
        except NoSolutionInGrid:
            full = math.inf
        drop = FeasibilitySpec({g.names[seed % g.dim]: VariablePolicy("mutable_non_actionable")})
        try:
            reduced = solve_mint(p.model, p.h, p.factual, drop, p.plaus, p.cost_cfg, cfg).cost
        except NoSolutionInGrid:
            reduced = math.inf
        assert reduced >= full - 1e-12
        checked += 1
    assert checked == 40


def test_returned_solutions_revalidate():
    for seed in range(30):
        p = random_problem(seed)
        try:
            sol = solve_mint(p.model, p.h, p.factual, p.spec, p.plaus, p.cost_cfg)
        except NoSolutionInGrid:
            continue
        assert sol.achieved and "recheck" not in sol.metadata
        res = compute_counterfactual(p.model, p.factual, sol.actions)
        assert p.h.predict(res.counterfactual) == FAVORABLE
        assert check_action(p.spec, p.plaus, p.model.graph, p.factual, sol.actions, res.counterfactual).ok
        assert sol.cost == pytest.approx(cost_of(sol.actions, p.factual, p.cost_cfg, p.model.graph))


# --- oracle ----------------------------------------------------------------------------------

def test_oracle_loan_world_hundred_dollar_grid(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    coarse = SearchConfig(step_fraction=100 / cost_cfg.ranges["X1"], refine_levels=0)
    assert finest_units(model.graph, ["X1"], cost_cfg, coarse)["X1"] == pytest.approx(100)
    oracle = brute_force_oracle(model, h, loan_factual, FeasibilitySpec(), plaus, cost_cfg, coarse)
    solver = solve_mint(model, h, loan_factual, FeasibilitySpec(), plaus, cost_cfg)
    assert abs(oracle.cost - solver.cost) <= 100 / cost_cfg.ranges["X1"] + 1e-12
    assert oracle.actions == InterventionSet.hard({"X1": 85000.0})


def test_oracle_and_solver_agree_on_infeasibility(loan_setup, loan_factual):
    model, h, cost_cfg, _ = loan_setup
    box = PlausibilitySpec({"X1": (0, 76000), "X2": (0, 25500)})
    cfg = SearchConfig(step_fraction=0.05, refine_levels=1)
    with pytest.raises(NoSolutionInGrid):
        solve_mint(model, h, loan_factual, FeasibilitySpec(), box, cost_cfg, cfg)
    with pytest.raises(NoSolutionInGrid):
        brute_force_oracle(model, h, loan_factual, FeasibilitySpec(), box, cost_cfg, cfg)


def test_oracle_refuses_large_problems(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    with pytest.raises(ProblemTooLarge):
        brute_force_oracle(model, h, loan_factual, FeasibilitySpec(), plaus, cost_cfg, max_points=1000)
    names = [f"V{i}" for i in range(5)]
    g = CausalGraph(tuple(VariableSchema(n) for n in names), {})
    big = StructuralCausalModel(g, {n: StructuralEquation(form="constant") for n in names})
    h5 = SignLinear(g.variables, np.ones(5), -1.0)
    with pytest.raises(ProblemTooLarge):
        brute_force_oracle(big, h5, np.zeros(5), FeasibilitySpec(), None, CostConfig({n: 1 for n in names}))


def test_solution_serialization(loan_setup, loan_factual):
    model, h, cost_cfg, plaus = loan_setup
    d = solve_mint(model, h, loan_factual, FeasibilitySpec(), plaus, cost_cfg).to_dict(model.graph)
    assert d["solver"] == "mint" and d["actions"] == [{"variable": "X1", "kind": HARD, "value": 85000.0}]
    assert d["counterfactual"] == {"X1": 85000.0, "X2": 28000.0}
