import numpy as np
import pytest

from causal_recourse.errors import MissingColumns
from causal_recourse.experiments import (
    GERMAN_LABEL,
    GERMAN_TRUTH,
    build_german_pipeline,
    generate_german_like,
    german_graph,
    revalidate,
    run_german_demo,
    run_synthetic_demo,
    synthetic_model,
)
from causal_recourse.recourse import CostConfig, SearchConfig, finest_units
from causal_recourse.scm import fit_linear_sem
from causal_recourse.serialization import write_dataset


@pytest.fixture(scope="module")
def small_german():
    return run_german_demo(seed=0, individuals=4)


def test_synthetic_demo_actions():
    report = run_synthetic_demo(seed=0)
    rec = report.records[0]
    g = synthetic_model().graph
    step = finest_units(g, ["X1", "X2"], CostConfig(report.config["ranges"]), SearchConfig())
    d = rec["cfe"]["delta"]
    assert abs(d["X1"]) <= step["X1"] and abs(d["X2"] - 5000) <= step["X2"]
    (mint,) = rec["mint"]["actions"]
    assert mint["variable"] == "X1" and abs(mint["value"] - 85000) <= step["X1"]
    assert rec["cfe_action"]["valid"] and rec["both"]
    assert 1.4 <= rec["cost_ratio"] <= 2.6
    assert report.aggregates["dominance_violations_strict"] == 0


def test_generator_schema_and_signal():
    X, y = generate_german_like(seed=0, n=1000)
    assert X.shape == (1000, 4) and set(np.unique(X[:, 0])) <= {0.0, 1.0}
    assert set(np.unique(y)) == {0, 1}
    assert np.corrcoef(X[:, 1], X[:, 2])[0, 1] > 0
    assert np.corrcoef(X[:, 2], X[:, 3])[0, 1] > 0
    with pytest.raises(ValueError):
        generate_german_like(seed=0, n=50)


def test_generator_coefficients_recovered():
    X, _ = generate_german_like(seed=1, n=200000)
    fitted = fit_linear_sem(german_graph(), X)
    t = GERMAN_TRUTH
    c, d = fitted.equations["credit"], fitted.equations["duration"]
    assert c.weights["age"] == pytest.approx(t["credit"]["age"], rel=0.05)
    assert c.weights["gender"][1] == pytest.approx(t["credit"]["gender"][1], rel=0.05)
    assert d.weights["credit"] == pytest.approx(t["duration"]["credit"], rel=0.05)


def test_generator_deterministic():
    a, b = generate_german_like(seed=3), generate_german_like(seed=3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_german_demo_structure(small_german):
    report = small_german
    forms = {r["classifier"] for r in report.records}
    assert forms == {"logistic", "tree"}
    for form in forms:
        agg = report.aggregates[form]
        assert agg["individuals"] <= 4 and agg["dominance_violations_strict"] == 0
        assert 0.5 <= agg["test_accuracy"] <= 1.0
    assert "note" in report.aggregates["reference_values"]
    rows = report.table_rows()
    assert len(rows) == len(report.records) and {"mint_cost", "cfe_cost"} <= set(rows[0])


def test_german_demo_deterministic(small_german):
    again = run_german_demo(seed=0, individuals=4)
    assert again.to_dict() == small_german.to_dict()


def test_stored_solutions_revalidate(small_german):
    p = build_german_pipeline(seed=0)
    assert revalidate(small_german, p.model, p.classifiers, p.spec, p.plaus) == []


def test_csv_data_route(tmp_path):
    g = german_graph()
    X, y = generate_german_like(seed=5, n=300)
    path = tmp_path / "credit.csv"
    write_dataset(path, g, X, y, GERMAN_LABEL)
    from_file = build_german_pipeline(path, seed=5)
    from_gen = build_german_pipeline(seed=5, n=300)
    assert from_file.source == str(path)
    for name in ("credit", "duration"):
        assert from_file.model.equations[name].weights == from_gen.model.equations[name].weights


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("gender,age,credit,label\nMale,30,1000,1\n")
    with pytest.raises(MissingColumns):
        build_german_pipeline(path)
