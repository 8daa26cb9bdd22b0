"""Reproducible demonstrations: the two-variable loan world, a credit-scoring
pipeline over (gender, age, credit, duration), and a population study that
compares CFE-based actions against minimal interventions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .counterfactual import compute_counterfactual
from .errors import NoSolutionInGrid
from .feasibility import (
    ACTIONABLE,
    IMMUTABLE,
    INCREASE_ONLY,
    NON_ACTIONABLE,
    FeasibilitySpec,
    PlausibilitySpec,
    VariablePolicy,
    check_action,
)
from .predictors import FAVORABLE, UNFAVORABLE, Classifier, SignLinear, train
from .recourse import (
    CostConfig,
    SearchConfig,
    build_cfe_action,
    cost_of,
    grid_cost_step,
    solve_cfe,
    solve_mint,
    verify_recourse,
)
from .scm import (
    CATEGORICAL,
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    describe_instance,
    fit_linear_sem,
    make_instance,
    sample,
)
from .serialization import read_dataset

# --- loan world -----------------------------------------------------------

SYNTHETIC_FACTUAL = (75000.0, 25000.0)


def synthetic_model() -> StructuralCausalModel:
    """X1 := U1, U1 ~ 10000 * Poisson(10);  X2 := 0.3 * X1 + U2, U2 ~ N(0, 2500^2)."""
    graph = CausalGraph((VariableSchema("X1"), VariableSchema("X2")), {"X2": ("X1",)})
    return StructuralCausalModel(graph, {
        "X1": StructuralEquation({}, 0.0, NoiseSpec.scaled_poisson(10000, 10), form="constant"),
        "X2": StructuralEquation({"X1": 0.3}, 0.0, NoiseSpec.gaussian(0.0, 2500.0)),
    })


def synthetic_classifier(model: StructuralCausalModel | None = None) -> SignLinear:
    """Approve iff X1 + 5 * X2 - 225000 >= 0."""
    model = model or synthetic_model()
    return SignLinear(model.variables, [1.0, 5.0], -225000.0)


# --- credit world -----------------------------------------------------------

GERMAN_FACTUAL = ("Male", 32, 1938, 24)
GERMAN_LABEL = "label"

# Ground truth used by the generator.  Units: years, currency units, months.
#   gender   ~ Categorical(Male 0.69, Female 0.31)
#   age      := 19 + U,  U ~ 1 * Poisson(16)
#   credit   := 40 * age - 300 * [Female] + U,  U ~ 250 * Poisson(6)
#   duration := 4 + 0.0025 * credit + U,  U ~ 2 * Poisson(5)
# Label: favorable iff z + L >= 0 with L ~ Logistic(0, GERMAN_LABEL_NOISE) and
#   z = GERMAN_LABEL_BIAS + 0.15 * (age - 35) - 0.0006 * (credit - 3000)
#       - 0.08 * (duration - 20) + 0.4 * [Male]
GERMAN_TRUTH = {
    "gender": {"probabilities": (0.69, 0.31)},
    "age": {"intercept": 19.0, "noise": ("scaled_poisson", 1.0, 16.0)},
    "credit": {"intercept": 0.0, "age": 40.0, "gender": (0.0, -300.0), "noise": ("scaled_poisson", 250.0, 6.0)},
    "duration": {"intercept": 4.0, "credit": 0.0025, "noise": ("scaled_poisson", 2.0, 5.0)},
}
GERMAN_LABEL_WEIGHTS = {"age": 0.15, "credit": -0.0006, "duration": -0.08, "male": 0.4}
GERMAN_LABEL_BIAS = -0.6
GERMAN_LABEL_NOISE = 0.25


def german_graph() -> CausalGraph:
    variables = (
        VariableSchema("gender", CATEGORICAL, ("Male", "Female")),
        VariableSchema("age", resolution=1.0),
        VariableSchema("credit"),
        VariableSchema("duration"),
    )
    return CausalGraph(variables, {"credit": ("gender", "age"), "duration": ("credit",)})


def german_truth_model() -> StructuralCausalModel:
    t = GERMAN_TRUTH
    return StructuralCausalModel(german_graph(), {
        "gender": StructuralEquation({}, 0.0, NoiseSpec.categorical(t["gender"]["probabilities"]), form="constant"),
        "age": StructuralEquation({}, t["age"]["intercept"], NoiseSpec.scaled_poisson(*t["age"]["noise"][1:]),
                                  form="constant"),
        "credit": StructuralEquation({"gender": t["credit"]["gender"], "age": t["credit"]["age"]},
                                     t["credit"]["intercept"], NoiseSpec.scaled_poisson(*t["credit"]["noise"][1:])),
        "duration": StructuralEquation({"credit": t["duration"]["credit"]}, t["duration"]["intercept"],
                                       NoiseSpec.scaled_poisson(*t["duration"]["noise"][1:])),
    })


def german_label_score(X: np.ndarray) -> np.ndarray:
    """Noise-free log-odds of the documented labelling rule."""
    X = np.atleast_2d(X)
    w = GERMAN_LABEL_WEIGHTS
    return (GERMAN_LABEL_BIAS + w["age"] * (X[:, 1] - 35) + w["credit"] * (X[:, 2] - 3000)
            + w["duration"] * (X[:, 3] - 20) + w["male"] * (X[:, 0] == 0))


def generate_german_like(seed: int = 0, n: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Rows (gender index, age, credit, duration) and 0/1 labels from the documented ground truth."""
    if n < 100:
        raise ValueError("generate_german_like needs n >= 100")
    X = sample(german_truth_model(), n, seed)
    rng = np.random.default_rng([seed, 1])
    noise = rng.logistic(0.0, GERMAN_LABEL_NOISE, size=n)
    y = (german_label_score(X) + noise >= 0).astype(int)
    return X, y


def german_feasibility() -> FeasibilitySpec:
    return FeasibilitySpec({
        "gender": VariablePolicy(IMMUTABLE),
        "age": VariablePolicy(ACTIONABLE, INCREASE_ONLY),
        "credit": VariablePolicy(ACTIONABLE),
        "duration": VariablePolicy(NON_ACTIONABLE),
    })


# --- reports --------------------------------------------------------------

REFERENCE_RELATIVE_EXTRA_COST = {
    "logistic": {"mean": 0.39, "std": 0.24},
    "tree": {"mean": 0.65, "std": 0.08},
    "note": "published reference points; the original preprocessing, splits and "
            "hyperparameters are unknown, so these are not expected to be reproduced",
}


@dataclass
class ExperimentReport:
    name: str
    records: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"experiment": self.name, "config": self.config,
                "aggregates": self.aggregates, "records": self.records}

    def table_rows(self) -> list[dict]:
        rows = []
        for r in self.records:
            cfe, mint = r.get("cfe_action") or {}, r.get("mint") or {}
            rows.append({
                "id": r.get("id"),
                "classifier": r.get("classifier", ""),
                "cfe_cost": _fmt(r.get("cfe", {}).get("cost")),
                "cfe_action_ok": cfe.get("valid", ""),
                "cfe_action": _fmt_actions(cfe.get("actions")),
                "mint_cost": _fmt(mint.get("cost")),
                "mint_action": _fmt_actions(mint.get("actions")),
                "cost_ratio": _fmt(r.get("cost_ratio")),
                "relative_extra": _fmt(r.get("relative_extra_cost")),
            })
        return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _fmt_actions(actions) -> str:
    if not actions:
        return "{}" if actions == [] else ""
    return "; ".join(f"{a['variable']}:={_fmt(a['value'])}" + ("" if a["kind"] == "hard" else " (soft)")
                     for a in actions)


def compare_individual(
    model: StructuralCausalModel,
    h: Classifier,
    factual: np.ndarray,
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    cost_cfg: CostConfig,
    search_cfg: SearchConfig,
) -> dict:
    """CFE, the CFE-based action, and MINT for one individual, as a report record."""
    graph = model.graph
    rec: dict[str, Any] = {"factual": describe_instance(graph, factual),
                           "factual_prediction": h.predict(factual)}
    try:
        cfe = solve_cfe(h, factual, spec, plaus, cost_cfg, search_cfg)
        rec["cfe"] = cfe.to_dict(graph)
        action = build_cfe_action(cfe.delta, factual, graph)
        res = compute_counterfactual(model, factual, action)
        verdict = check_action(spec, plaus, graph, factual, action, res.counterfactual)
        achieves = h.predict(res.counterfactual) == FAVORABLE
        rec["cfe_action"] = {
            "actions": action.to_records(),
            "counterfactual": describe_instance(graph, res.counterfactual),
            "cost": cost_of(action, factual, cost_cfg, graph),
            "feasible": verdict.ok,
            "violations": sorted(verdict.kinds()),
            "achieves_recourse": achieves,
            "valid": verdict.ok and achieves,
        }
    except NoSolutionInGrid as exc:
        rec["cfe"] = {"error": "NoSolutionInGrid", "best_gap": _finite(exc.best_gap)}
    try:
        mint = solve_mint(model, h, factual, spec, plaus, cost_cfg, search_cfg)
        rec["mint"] = mint.to_dict(graph)
    except NoSolutionInGrid as exc:
        rec["mint"] = {"error": "NoSolutionInGrid", "best_gap": _finite(exc.best_gap)}
    action_cost = rec.get("cfe_action", {}).get("cost")
    mint_cost = rec["mint"].get("cost")
    if rec.get("cfe_action", {}).get("valid") and mint_cost is not None:
        rec["both"] = True
        rec["cost_ratio"] = action_cost / mint_cost if mint_cost > 0 else None
        rec["relative_extra_cost"] = (action_cost - mint_cost) / mint_cost if mint_cost > 0 else None
        rec["grid_step"] = grid_cost_step(graph, spec.actionable(graph), cost_cfg, search_cfg)
    else:
        rec["both"] = False
    return rec


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _aggregate(records: list[dict]) -> dict:
    both = [r for r in records if r["both"] and r.get("relative_extra_cost") is not None]
    rel = np.array([r["relative_extra_cost"] for r in both])
    cfe_costs = np.array([r["cfe_action"]["cost"] for r in both])
    mint_costs = np.array([r["mint"]["cost"] for r in both])
    out = {
        "individuals": len(records),
        "both_achieved": len(both),
        "cfe_action_fails_recourse": sum(1 for r in records if r.get("cfe_action", {}).get("achieves_recourse") is False),
        "cfe_action_infeasible": sum(1 for r in records if r.get("cfe_action", {}).get("feasible") is False),
        "mint_no_solution": sum(1 for r in records if "error" in r["mint"]),
        "dominance_violations": int(sum(
            1 for r in both if r["mint"]["cost"] > r["cfe_action"]["cost"] + r["grid_step"])),
        "dominance_violations_strict": int(sum(
            1 for r in both if r["mint"]["cost"] > r["cfe_action"]["cost"] + 1e-12)),
    }
    if both:
        out.update({
            "relative_extra_cost_mean": float(rel.mean()),
            "relative_extra_cost_std": float(rel.std()),
            "ratio_of_means_extra_cost": float(cfe_costs.mean() / mint_costs.mean() - 1.0),
            "mean_cfe_action_cost": float(cfe_costs.mean()),
            "mean_mint_cost": float(mint_costs.mean()),
        })
    return out


def _search_echo(cfg: SearchConfig) -> dict:
    return {"step_fraction": cfg.step_fraction, "refine_levels": cfg.refine_levels,
            "max_set_size": cfg.max_set_size, "span": cfg.span}


def run_synthetic_demo(
    seed: int = 0,
    n: int = 10000,
    search_cfg: SearchConfig = SearchConfig(),
    plausibility: bool = True,
) -> ExperimentReport:
    """Both solvers for the loan world's factual, with ranges from ``n`` samples."""
    model = synthetic_model()
    h = synthetic_classifier(model)
    data = sample(model, n, seed)
    cost_cfg = CostConfig.from_data(model.graph, data)
    plaus = PlausibilitySpec.from_data(model.graph, data) if plausibility else None
    spec = FeasibilitySpec()
    x = make_instance(model.graph, SYNTHETIC_FACTUAL)
    rec = compare_individual(model, h, x, spec, plaus, cost_cfg, search_cfg)
    rec["id"] = 0
    return ExperimentReport(
        "synthetic",
        [rec],
        _aggregate([rec]),
        {"seed": seed, "n": n, "ranges": dict(cost_cfg.ranges), "plausibility": plausibility,
         "search": _search_echo(search_cfg), "classifier": h.to_dict()},
    )


@dataclass
class GermanPipeline:
    """Everything fitted from one dataset, reusable across experiments and tests."""

    model: StructuralCausalModel
    classifiers: dict[str, Classifier]
    spec: FeasibilitySpec
    plaus: PlausibilitySpec | None
    cost_cfg: CostConfig
    test_X: np.ndarray
    test_y: np.ndarray
    source: str


def build_german_pipeline(
    data_path: str | Path | None = None,
    seed: int = 0,
    n: int = 1000,
    test_fraction: float = 0.3,
    plausibility: bool = True,
) -> GermanPipeline:
    graph = german_graph()
    if data_path is not None:
        X, y = read_dataset(data_path, graph, GERMAN_LABEL)
        source = str(data_path)
    else:
        X, y = generate_german_like(seed, n)
        source = f"generator(seed={seed}, n={n})"
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    X, y = X[perm], y[perm]
    n_test = max(1, int(round(test_fraction * X.shape[0])))
    train_X, train_y = X[:-n_test], y[:-n_test]
    test_X, test_y = X[-n_test:], y[-n_test:]
    model = fit_linear_sem(graph, train_X)
    classifiers = {form: train(form, graph.variables, train_X, train_y, seed) for form in ("logistic", "tree")}
    return GermanPipeline(
        model, classifiers, german_feasibility(),
        PlausibilitySpec.from_data(graph, X) if plausibility else None,
        CostConfig.from_data(graph, X), test_X, test_y, source,
    )


def run_german_demo(
    data_path: str | Path | None = None,
    seed: int = 0,
    n: int = 1000,
    individuals: int = 50,
    search_cfg: SearchConfig = SearchConfig(),
    plausibility: bool = True,
) -> ExperimentReport:
    """Fit, train, then compare solvers on the reference factual and on the
    first ``individuals`` unfavorable test rows of each classifier."""
    p = build_german_pipeline(data_path, seed, n, plausibility=plausibility)
    graph = p.model.graph
    factual = make_instance(graph, GERMAN_FACTUAL)
    records: list[dict] = []
    aggregates: dict = {}
    for form, h in p.classifiers.items():
        ref = compare_individual(p.model, h, factual, p.spec, p.plaus, p.cost_cfg, search_cfg)
        ref.update({"id": "reference", "classifier": form})
        records.append(ref)
        pred = h.predict_batch(p.test_X)
        rows = np.flatnonzero(pred == UNFAVORABLE)[:individuals]
        batch = []
        for i in rows:
            rec = compare_individual(p.model, h, p.test_X[i], p.spec, p.plaus, p.cost_cfg, search_cfg)
            rec.update({"id": int(i), "classifier": form})
            batch.append(rec)
        records.extend(batch)
        aggregates[form] = _aggregate(batch)
        aggregates[form]["test_accuracy"] = float(np.mean(pred == p.test_y))
    aggregates["reference_values"] = REFERENCE_RELATIVE_EXTRA_COST
    return ExperimentReport(
        "german",
        records,
        aggregates,
        {"seed": seed, "source": p.source, "individuals": individuals, "plausibility": plausibility,
         "ranges": dict(p.cost_cfg.ranges), "search": _search_echo(search_cfg),
         "fitted_equations": {name: {"weights": eq.weights, "intercept": eq.intercept}
                              for name, eq in p.model.equations.items() if eq.weights},
         "classifiers": {k: h.to_dict() for k, h in p.classifiers.items()}},
    )


def revalidate(report: ExperimentReport, model: StructuralCausalModel, classifiers: dict[str, Classifier],
               spec: FeasibilitySpec, plaus: PlausibilitySpec | None) -> list[str]:
    """Re-run verify_recourse and check_action on every stored MINT solution; return failures."""
    from .counterfactual import InterventionSet

    graph = model.graph
    problems = []
    for r in report.records:
        mint = r.get("mint", {})
        if "actions" not in mint or not mint.get("achieved"):
            continue
        h = classifiers[r.get("classifier", "default")]
        x = make_instance(graph, [r["factual"][n] for n in graph.names])
        actions = InterventionSet.from_records(mint["actions"])
        res = compute_counterfactual(model, x, actions)
        if not verify_recourse(model, h, x, actions):
            problems.append(f"record {r['id']}: stored action no longer achieves recourse")
        if not check_action(spec, plaus, graph, x, actions, res.counterfactual).ok:
            problems.append(f"record {r['id']}: stored action fails feasibility")
    return problems

