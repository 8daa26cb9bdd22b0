import numpy as np
import pytest

from causal_recourse.errors import (
    CyclicGraph,
    DanglingParent,
    EmptyDataset,
    EquationArityMismatch,
    SchemaMismatch,
    SingularDesign,
)
from causal_recourse.experiments import GERMAN_TRUTH, german_graph, german_truth_model
from causal_recourse.scm import (
    CATEGORICAL,
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    abduct,
    evaluate,
    fit_linear_sem,
    make_instance,
    sample,
    validate,
)


def _two(parents, eqs):
    g = CausalGraph((VariableSchema("A"), VariableSchema("B")), parents)
    return StructuralCausalModel(g, eqs)


def _noiseless_loan():
    g = CausalGraph((VariableSchema("X1"), VariableSchema("X2")), {"X2": ("X1",)})
    return StructuralCausalModel(g, {
        "X1": StructuralEquation({}, 0.0, NoiseSpec.scaled_poisson(10000, 10), form="constant"),
        "X2": StructuralEquation({"X1": 0.3}, 0.0, NoiseSpec.point_mass(0.0)),
    })


# --- validate ------------------------------------------------------------------

def test_chain_order(loan_model):
    assert validate(loan_model) == ["X1", "X2"]


def test_edgeless_graph_accepts_any_order():
    m = _two({}, {"A": StructuralEquation(form="constant"), "B": StructuralEquation(form="constant")})
    assert sorted(validate(m)) == ["A", "B"]


def test_cycle_rejected():
    eq = StructuralEquation({"B": 1.0})
    with pytest.raises(CyclicGraph):
        _two({"A": ("B",), "B": ("A",)}, {"A": eq, "B": StructuralEquation({"A": 1.0})})


def test_unknown_parent_rejected():
    with pytest.raises(DanglingParent):
        _two({"B": ("Z",)}, {"A": StructuralEquation(form="constant"), "B": StructuralEquation({"Z": 1.0})})


def test_weights_must_match_parents():
    with pytest.raises(EquationArityMismatch):
        _two({"B": ("A",)}, {"A": StructuralEquation(form="constant"), "B": StructuralEquation({})})


def test_schema_invariants():
    with pytest.raises(SchemaMismatch):
        VariableSchema("g", CATEGORICAL, ("only",))
    with pytest.raises(SchemaMismatch):
        CausalGraph((VariableSchema("A"), VariableSchema("A")), {})


def test_categorical_must_be_root():
    g = CausalGraph((VariableSchema("A"), VariableSchema("C", CATEGORICAL, ("x", "y"))), {"C": ("A",)})
    with pytest.raises(SchemaMismatch):
        StructuralCausalModel(g, {"A": StructuralEquation(form="constant"), "C": StructuralEquation({"A": 1.0})})


# --- abduct ----------------------------------------------------------------------

def test_abduct_loan_world(loan_model):
    x = np.array([75000.0, 25000.0])
    # u2 = x2 - 0.3 * x1 by hand
    assert np.array_equal(abduct(loan_model, x), [75000.0, 25000.0 - 0.3 * 75000.0])
    np.testing.assert_allclose(abduct(loan_model, x), [75000, 2500], atol=1e-9)


def test_abduct_recovers_known_noise(loan_model):
    u = np.array([120000.0, -1234.5])
    x = evaluate(loan_model, u)
    np.testing.assert_allclose(abduct(loan_model, x), u, atol=1e-9)


def test_abduct_credit_graph_by_hand():
    model = german_truth_model()
    x = sample(model, 5, seed=3)[4]
    t = GERMAN_TRUTH
    female = x[0] == 1
    expected = [
        x[0],
        x[1] - t["age"]["intercept"],
        x[2] - t["credit"]["age"] * x[1] - t["credit"]["gender"][1] * female,
        x[3] - t["duration"]["intercept"] - t["duration"]["credit"] * x[2],
    ]
    u = abduct(model, x)
    np.testing.assert_allclose(u, expected, atol=1e-9)
    np.testing.assert_allclose(evaluate(model, u), x, atol=1e-9)


def test_abduct_schema_mismatch(loan_model):
    with pytest.raises(SchemaMismatch):
        abduct(loan_model, [1.0, 2.0, 3.0])


# --- sample ------------------------------------------------------------------------

def test_point_mass_noise_gives_exact_mechanism():
    X = sample(_noiseless_loan(), 500, seed=1)
    assert np.array_equal(X[:, 1], 0.3 * X[:, 0])


def test_sample_mean_law_of_large_numbers(loan_model):
    n = 10000
    X = sample(loan_model, n, seed=0)
    se = 10000 * np.sqrt(10) / np.sqrt(n)  # sd of 10000 * Poisson(10)
    assert abs(X[:, 0].mean() - 100000) < 3 * se


def test_sample_deterministic(loan_model):
    assert np.array_equal(sample(loan_model, 100, seed=7), sample(loan_model, 100, seed=7))
    assert not np.array_equal(sample(loan_model, 100, seed=7), sample(loan_model, 100, seed=8))


def test_sample_rejects_empty(loan_model):
    with pytest.raises(EmptyDataset):
        sample(loan_model, 0)


# --- fit -----------------------------------------------------------------------------

def test_fit_noiseless_is_exact():
    X = sample(_noiseless_loan(), 200, seed=2)
    fitted = fit_linear_sem(_noiseless_loan().graph, X)
    eq = fitted.equations["X2"]
    assert abs(eq.weights["X1"] - 0.3) < 1e-9
    assert abs(eq.intercept) < 1e-9 * 1e5


def test_fit_loan_world_weight(loan_model):
    X = sample(loan_model, 10000, seed=0)
    eq = fit_linear_sem(loan_model.graph, X).equations["X2"]
    assert abs(eq.weights["X1"] - 0.3) <= 0.02
    # roots are moment matched
    root = fit_linear_sem(loan_model.graph, X).equations["X1"].noise
    assert root.distribution == "gaussian"
    assert abs(root.params["mean"] - X[:, 0].mean()) < 1e-6


def test_fit_credit_graph_unit_scale():
    # same graph as the credit pipeline, unit-scale coefficients
    graph = german_graph()
    truth = StructuralCausalModel(graph, {
        "gender": StructuralEquation({}, 0, NoiseSpec.categorical((0.6, 0.4)), form="constant"),
        "age": StructuralEquation({}, 0, NoiseSpec.gaussian(0, 1), form="constant"),
        "credit": StructuralEquation({"gender": (0.0, -0.3), "age": 0.5}, 0.2, NoiseSpec.gaussian(0, 0.5)),
        "duration": StructuralEquation({"credit": 0.8}, -0.1, NoiseSpec.gaussian(0, 0.5)),
    })
    fitted = fit_linear_sem(graph, sample(truth, 20000, seed=4))
    c, d = fitted.equations["credit"], fitted.equations["duration"]
    assert abs(c.weights["age"] - 0.5) <= 0.05
    assert abs(c.weights["gender"][1] + 0.3) <= 0.05
    assert abs(c.intercept - 0.2) <= 0.05
    assert abs(d.weights["credit"] - 0.8) <= 0.05
    assert abs(d.intercept + 0.1) <= 0.05


def test_fit_collinear_parents():
    g = CausalGraph((VariableSchema("A"), VariableSchema("B"), VariableSchema("C")), {"C": ("A", "B")})
    A = np.arange(20.0)
    X = np.column_stack([A, 2 * A, A + 1])
    with pytest.raises(SingularDesign):
        fit_linear_sem(g, X)


def test_fit_empty():
    with pytest.raises(EmptyDataset):
        fit_linear_sem(_noiseless_loan().graph, np.zeros((0, 2)))


def test_make_instance_labels():
    g = german_graph()
    x = make_instance(g, ("Female", 40, 2000, 12))
    assert x.tolist() == [1.0, 40.0, 2000.0, 12.0]
    with pytest.raises(SchemaMismatch):
        make_instance(g, ("Other", 40, 2000, 12))
