import numpy as np
import pytest

from causal_recourse.counterfactual import (
    HARD,
    SOFT,
    Intervention,
    InterventionSet,
    affected_variables,
    compute_counterfactual,
    counterfactual_batch,
    forward_from_noise,
)
from causal_recourse.errors import SchemaMismatch, SoftOnCategorical
from causal_recourse.experiments import german_truth_model
from causal_recourse.scm import abduct, make_instance, sample


def test_hard_root_propagates(loan_model, loan_factual):
    res = compute_counterfactual(loan_model, loan_factual, InterventionSet.hard({"X1": 85000}))
    np.testing.assert_allclose(res.counterfactual, [85000, 28000], atol=1e-6)
    assert res.intervened == ("X1",)
    np.testing.assert_allclose(res.exogenous, [75000, 2500], atol=1e-9)


def test_empty_action_is_identity(loan_model, loan_factual):
    res = compute_counterfactual(loan_model, loan_factual, InterventionSet())
    assert np.array_equal(res.counterfactual, loan_factual)


def test_hard_on_child_severs_edge(loan_model, loan_factual):
    res = compute_counterfactual(loan_model, loan_factual, InterventionSet.hard({"X2": 30000}))
    assert res.counterfactual.tolist() == [75000, 30000]


def test_soft_on_child_is_offset(loan_model, loan_factual):
    acts = InterventionSet((Intervention("X2", SOFT, 5000),))
    assert compute_counterfactual(loan_model, loan_factual, acts).counterfactual.tolist() == [75000, 30000]


def test_soft_keeps_mechanism_when_parent_moves(loan_model, loan_factual):
    acts = InterventionSet((Intervention("X1", HARD, 85000), Intervention("X2", SOFT, 1000)))
    # 25000 + 0.3 * 10000 from the mechanism, then the 1000 offset
    np.testing.assert_allclose(compute_counterfactual(loan_model, loan_factual, acts).counterfactual,
                               [85000, 29000], atol=1e-9)


def test_root_hard_equals_soft(loan_model, loan_factual):
    hard = compute_counterfactual(loan_model, loan_factual, InterventionSet.hard({"X1": 85000}))
    soft = compute_counterfactual(loan_model, loan_factual, InterventionSet((Intervention("X1", SOFT, 10000),)))
    np.testing.assert_allclose(hard.counterfactual, soft.counterfactual, atol=1e-9)


def test_credit_world_reference_action():
    model = german_truth_model()
    x = make_instance(model.graph, ("Male", 32, 1938, 24))
    res = compute_counterfactual(model, x, InterventionSet.hard({"age": 33, "credit": 1138}))
    # duration moves by 0.0025 * (1138 - 1938) = -2
    np.testing.assert_allclose(res.counterfactual, [0, 33, 1138, 22], atol=1e-9)


def test_non_descendants_untouched():
    model = german_truth_model()
    x = sample(model, 1, seed=5)[0]
    res = compute_counterfactual(model, x, InterventionSet.hard({"credit": x[2] + 500}))
    assert res.counterfactual[0] == x[0] and res.counterfactual[1] == x[1]
    assert res.counterfactual[3] != x[3]
    assert affected_variables(model, InterventionSet.hard({"credit": 1})) == {"duration"}
    assert affected_variables(model, ["age", "credit"]) == {"duration"}


def test_categorical_hard_and_soft():
    model = german_truth_model()
    x = make_instance(model.graph, ("Male", 32, 1938, 24))
    res = compute_counterfactual(model, x, InterventionSet.hard({"gender": "Female"}))
    np.testing.assert_allclose(res.counterfactual[:3], [1, 32, 1938 - 300], atol=1e-9)
    with pytest.raises(SoftOnCategorical):
        compute_counterfactual(model, x, InterventionSet((Intervention("gender", SOFT, 1),)))


def test_rejects_bad_actions(loan_model, loan_factual):
    with pytest.raises(SchemaMismatch):
        InterventionSet((Intervention("X1", HARD, 1), Intervention("X1", SOFT, 2)))
    with pytest.raises(SchemaMismatch):
        Intervention("X1", "fat_hand", 1)
    with pytest.raises(SchemaMismatch):
        compute_counterfactual(loan_model, loan_factual, InterventionSet.hard({"X9": 1}))


def test_batch_matches_noise_route():
    model = german_truth_model()
    x = sample(model, 1, seed=11)[0]
    vals = np.array([[30, 2000.0], [40, 900.0], [x[1], x[2]]])
    for kinds in ((HARD, HARD), (HARD, SOFT)):
        a = counterfactual_batch(model, x, [1, 2], kinds, vals)
        b = forward_from_noise(model, abduct(model, x), [1, 2], kinds, vals)
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_records_roundtrip():
    acts = InterventionSet((Intervention("X1", HARD, 85000.0), Intervention("X2", SOFT, -3.0)))
    assert InterventionSet.from_records(acts.to_records()) == acts
