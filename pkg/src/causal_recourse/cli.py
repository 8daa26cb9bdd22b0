"""Command-line entry point: ``causal-recourse <group> <command> [options]``.

Exit status: 0 on success, 1 on domain errors (invalid models, no solution
in the grid, ...), 2 on usage errors.  With ``--out FILE.json`` a command
also writes ``FILE.csv`` (the printed table) and, where it makes sense,
``FILE_<figure>.png`` next to it.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments
from .counterfactual import SOFT, InterventionSet, compute_counterfactual
from .errors import NoSolutionInGrid, RecourseError
from .feasibility import FeasibilitySpec, PlausibilitySpec, ancestral_closure, check_action
from .predictors import SignLinear
from .recourse import (
    CostConfig,
    SearchConfig,
    brute_force_oracle,
    build_cfe_action,
    cost_of,
    solve_cfe,
    solve_mint,
    verify_recourse,
)
from .report import (
    cost_bar_painter,
    cost_scatter_painter,
    extra_cost_painter,
    format_table,
    loan_world_painter,
    write_report,
)
from .scm import describe_instance, fit_linear_sem, sample
from .serialization import (
    load_actions,
    load_classifier,
    load_feasibility,
    load_scm,
    parse_factual,
    read_dataset,
    save_scm,
    write_dataset,
)

RANGE_SAMPLES = 10000


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causal-recourse", description=__doc__.splitlines()[0])
    groups = ap.add_subparsers(dest="group", required=True)

    def common(p, scm=True):
        if scm:
            p.add_argument("--scm", type=_existing, required=True, help="SCM spec file (YAML or JSON)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--out", type=Path, help="write the report here (JSON) plus a CSV table")

    def search_opts(p):
        p.add_argument("--grid-step", type=_positive_float, default=0.01,
                       help="coarse grid step as a fraction of each variable's range (default 0.01)")
        p.add_argument("--refine-levels", type=_nonneg_int, default=2,
                       help="refinement levels, each dividing the step by 10 (default 2)")
        p.add_argument("--max-set-size", type=int, help="largest intervention set to consider")
        p.add_argument("--no-plausibility", action="store_true", help="drop the box constraints on outcomes")

    scm = groups.add_parser("scm", help="validate, sample or fit structural causal models")
    scm_cmds = scm.add_subparsers(dest="command", required=True)
    common(scm_cmds.add_parser("validate", help="check a spec and print its topological order"))
    p = scm_cmds.add_parser("sample", help="draw a dataset (labelled if the SCM file has a classifier)")
    common(p)
    p.add_argument("-n", type=int, default=1000, help="rows to draw (default 1000)")
    p = scm_cmds.add_parser("fit", help="least-squares fit of the SCM file's graph to a dataset")
    common(p)
    p.add_argument("--data", type=_existing, required=True)

    cf = groups.add_parser("cf", help="structural counterfactuals")
    cf_cmds = cf.add_subparsers(dest="command", required=True)
    p = cf_cmds.add_parser("compute", help="counterfactual of a factual under an action file")
    common(p)
    p.add_argument("--factual", required=True, help="comma-separated values in schema order, or a one-row CSV")
    p.add_argument("--actions", type=_existing, help="list of {variable, kind, value} records (default: none)")

    rec = groups.add_parser("recourse", help="solve for recourse")
    rec_cmds = rec.add_subparsers(dest="command", required=True)
    for name, desc in (("cfe", "nearest counterfactual explanation and its CFE-based action"),
                       ("mint", "minimal-cost intervention set"),
                       ("compare", "both, side by side")):
        p = rec_cmds.add_parser(name, help=desc)
        common(p)
        search_opts(p)
        p.add_argument("--factual", required=True, help="comma-separated values in schema order, or a one-row CSV")
        p.add_argument("--classifier", type=_existing, help="classifier file (default: the one in the SCM file)")
        p.add_argument("--feasibility", type=_existing, help="feasibility spec (default: everything actionable)")
        p.add_argument("--data", type=_existing,
                       help="reference data for ranges and boxes (default: declared ranges, else 10000 samples)")
        p.add_argument("--solver", choices=("grid", "oracle"), default="grid",
                       help="MINT solver: pruned grid search or exhaustive enumeration")
        p.add_argument("--soft-default", action="store_true",
                       help="make numeric variables without a feasibility entry use soft interventions")

    exp = groups.add_parser("experiment", help="canned demonstrations")
    exp_cmds = exp.add_subparsers(dest="command", required=True)
    p = exp_cmds.add_parser("synthetic", help="two-variable loan world")
    common(p, scm=False)
    search_opts(p)
    p.add_argument("-n", type=int, default=10000, help="samples used for ranges (default 10000)")
    p = exp_cmds.add_parser("german", help="credit pipeline and population study")
    common(p, scm=False)
    search_opts(p)
    p.add_argument("--data", type=_existing, help="CSV with gender, age, credit, duration, label (default: generator)")
    p.add_argument("-n", type=int, default=1000, help="generator rows when --data is absent (default 1000)")
    p.add_argument("--individuals", type=int, default=50, help="unfavorable test rows per classifier (default 50)")
    return ap


def _search_cfg(args) -> SearchConfig:
    return SearchConfig(step_fraction=args.grid_step, refine_levels=args.refine_levels,
                        max_set_size=args.max_set_size)


def _emit(args, document: dict, rows: list[dict], figures=()) -> None:
    sys.stdout.write(format_table(rows))
    if args.out is not None:
        for path in write_report(args.out, document, rows, figures):
            print(f"wrote {path}")


# --- scm ---------------------------------------------------------------------

def cmd_scm(args) -> int:
    model, h = load_scm(args.scm)
    if args.command == "validate":
        rows = [{"position": i, "variable": n, "parents": ",".join(model.graph.parents[n])}
                for i, n in enumerate(model.order)]
        _emit(args, {"valid": True, "topological_order": list(model.order)}, rows)
    elif args.command == "sample":
        X = sample(model, args.n, args.seed)
        labels = h.predict_batch(X) if h is not None else None
        if args.out is None:
            raise argparse.ArgumentTypeError("scm sample needs --out")
        write_dataset(args.out, model.graph, X, labels)
        print(f"wrote {args.out} ({args.n} rows)")
    else:
        X, _ = read_dataset(args.data, model.graph)
        fitted = fit_linear_sem(model.graph, X)
        rows = [{"variable": n, "intercept": f"{eq.intercept:.6g}",
                 "weights": "; ".join(f"{k}={w}" for k, w in eq.weights.items()),
                 "noise": eq.noise.distribution}
                for n, eq in fitted.equations.items()]
        sys.stdout.write(format_table(rows))
        if args.out is not None:
            save_scm(args.out, fitted, h)
            print(f"wrote {args.out}")
    return 0


# --- cf ----------------------------------------------------------------------

def cmd_cf(args) -> int:
    model, _ = load_scm(args.scm)
    x = parse_factual(model.graph, args.factual)
    actions = load_actions(args.actions) if args.actions else InterventionSet()
    res = compute_counterfactual(model, x, actions)
    g = model.graph
    rows = [{"variable": n, "factual": describe_instance(g, x)[n],
             "exogenous": f"{res.exogenous[j]:.6g}", "counterfactual": describe_instance(g, res.counterfactual)[n]}
            for j, n in enumerate(g.names)]
    doc = {"factual": describe_instance(g, x), "actions": actions.to_records(),
           "exogenous": dict(zip(g.names, res.exogenous.tolist())),
           "counterfactual": describe_instance(g, res.counterfactual)}
    _emit(args, doc, rows)
    return 0


# --- recourse ----------------------------------------------------------------

def _problem(args):
    model, h = load_scm(args.scm)
    g = model.graph
    if args.classifier:
        h = load_classifier(args.classifier, model.variables)
    if h is None:
        raise argparse.ArgumentTypeError("no classifier: pass --classifier or add one to the SCM spec")
    spec = load_feasibility(args.feasibility) if args.feasibility else FeasibilitySpec()
    spec.validate_against(g)
    if args.soft_default:
        policies = dict(spec.policies)
        for v in g.variables:
            if v.name not in policies and not v.is_categorical:
                policies[v.name] = replace(spec.policy(v.name), kinds=(SOFT,))
        spec = FeasibilitySpec(policies, spec.conditions)
    spec = ancestral_closure(spec, g)
    numeric = [v for v in g.variables if not v.is_categorical]
    if args.data:
        ref, source = read_dataset(args.data, g)[0], str(args.data)
    elif all(v.declared_range is not None for v in numeric):
        ref, source = None, "declared ranges"
    else:
        ref, source = sample(model, RANGE_SAMPLES, args.seed), f"{RANGE_SAMPLES} samples (seed {args.seed})"
    if ref is None:
        cost_cfg = CostConfig({v.name: v.declared_range[1] - v.declared_range[0] for v in numeric})
        plaus = PlausibilitySpec.from_declared(g)
    else:
        cost_cfg = CostConfig.from_data(g, ref)
        plaus = PlausibilitySpec.from_data(g, ref)
    if args.no_plausibility:
        plaus = None
    x = parse_factual(g, args.factual)
    return model, h, spec, plaus, cost_cfg, x, source


def _solution_row(name, g, sol_dict) -> dict:
    return {"solver": name,
            "action": _delta_text(sol_dict["delta"]) if "delta" in sol_dict else experiments._fmt_actions(sol_dict["actions"]),
            "result": ", ".join(f"{k}={experiments._fmt(v)}" for k, v in sol_dict["counterfactual"].items()),
            "cost": experiments._fmt(sol_dict["cost"]),
            "achieved": sol_dict["achieved"]}


def _delta_text(delta) -> str:
    if not delta:
        return ""
    return "delta=[" + ", ".join(experiments._fmt(v) for v in delta.values()) + "]"


def cmd_recourse(args) -> int:
    model, h, spec, plaus, cost_cfg, x, source = _problem(args)
    g = model.graph
    cfg = _search_cfg(args)
    doc: dict = {"config": {"ranges": dict(cost_cfg.ranges), "range_source": source, "seed": args.seed,
                            "plausibility": None if plaus is None else plaus.to_dict(),
                            "search": experiments._search_echo(cfg), "solver": args.solver,
                            "classifier": h.to_dict()},
                 "factual": describe_instance(g, x), "factual_prediction": h.predict(x)}
    rows, costs = [], {}
    status = 0
    if args.command in ("cfe", "compare"):
        try:
            cfe = solve_cfe(h, x, spec, plaus, cost_cfg, cfg)
            doc["cfe"] = cfe.to_dict(g)
            rows.append(_solution_row("cfe", g, doc["cfe"]))
            costs["CFE"] = cfe.cost
            action = build_cfe_action(cfe.delta, x, g)
            res = compute_counterfactual(model, x, action)
            verdict = check_action(spec, plaus, g, x, action, res.counterfactual)
            doc["cfe_action"] = {"actions": action.to_records(), "counterfactual": describe_instance(g, res.counterfactual),
                                 "cost": cost_of(action, x, cost_cfg, g), "feasible": verdict.ok,
                                 "violations": sorted(verdict.kinds()),
                                 "achieved": verify_recourse(model, h, x, action)}
            rows.append(_solution_row("cfe_action", g, doc["cfe_action"]))
            costs["CFE action"] = doc["cfe_action"]["cost"]
        except NoSolutionInGrid as exc:
            doc["cfe"] = _no_solution(exc)
            rows.append({"solver": "cfe", "action": "no solution in grid", "result": "", "cost": "", "achieved": False})
            status = 1
    if args.command in ("mint", "compare"):
        solver = brute_force_oracle if args.solver == "oracle" else solve_mint
        try:
            mint = solver(model, h, x, spec, plaus, cost_cfg, cfg)
            doc["mint"] = mint.to_dict(g)
            rows.append(_solution_row(mint.solver, g, doc["mint"]))
            costs["MINT"] = mint.cost
        except NoSolutionInGrid as exc:
            doc["mint"] = _no_solution(exc)
            rows.append({"solver": "mint", "action": "no solution in grid", "result": "", "cost": "", "achieved": False})
            status = 1
    if "CFE" in costs and "MINT" in costs and costs["MINT"] > 0:
        doc["cost_ratio"] = costs["CFE"] / costs["MINT"]
        doc["action_cost_ratio"] = costs["CFE action"] / costs["MINT"]
    figures = [("costs", cost_bar_painter(costs))] if costs else []
    _emit(args, doc, rows, figures)
    if "cost_ratio" in doc:
        print(f"cost ratio CFE/MINT: {doc['cost_ratio']:.4g}  (CFE-based action/MINT: {doc['action_cost_ratio']:.4g})")
    if status:
        print("error: NoSolutionInGrid (see report for the best gap)", file=sys.stderr)
    return status


def _no_solution(exc: NoSolutionInGrid) -> dict:
    gap = exc.best_gap if np.isfinite(exc.best_gap) else None
    return {"error": "NoSolutionInGrid", "message": str(exc), "best_gap": gap, "nodes_explored": exc.nodes_explored}


# --- experiments -------------------------------------------------------------

def cmd_experiment(args) -> int:
    cfg = _search_cfg(args)
    plaus = not args.no_plausibility
    if args.command == "synthetic":
        rep = experiments.run_synthetic_demo(args.seed, args.n, cfg, plaus)
        model = experiments.synthetic_model()
        h: SignLinear = experiments.synthetic_classifier(model)
        data = sample(model, args.n, args.seed)[:2000]
        figures = [("scatter", loan_world_painter(data, h.weights, h.bias, rep.records[0]))]
        _emit(args, rep.to_dict(), rep.table_rows(), figures)
        r = rep.records[0]
        if r.get("cost_ratio") is not None:
            print(f"cost ratio CFE/MINT: {r['cfe']['cost'] / r['mint']['cost']:.4g}")
    else:
        rep = experiments.run_german_demo(args.data, args.seed, args.n, args.individuals, cfg, plaus)
        figures = [("extra_cost", extra_cost_painter(rep.records)), ("costs", cost_scatter_painter(rep.records))]
        _emit(args, rep.to_dict(), rep.table_rows(), figures)
        for form in ("logistic", "tree"):
            a = rep.aggregates[form]
            if "relative_extra_cost_mean" in a:
                print(f"{form}: relative extra cost of CFE-based actions {a['relative_extra_cost_mean']:.1%} "
                      f"+/- {a['relative_extra_cost_std']:.1%} over {a['both_achieved']} individuals; "
                      f"ratio of means {a['ratio_of_means_extra_cost']:.1%}")
    return 0


COMMANDS = {"scm": cmd_scm, "cf": cmd_cf, "recourse": cmd_recourse, "experiment": cmd_experiment}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.group](args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RecourseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
