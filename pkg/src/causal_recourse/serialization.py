"""Spec files (YAML or JSON), datasets (CSV) and action lists.

SCM spec::

    format_version: 1
    variables:
      - name: X1
        parents: []
        intercept: 0
        noise: {distribution: scaled_poisson, scale: 10000, rate: 10}
      - name: X2
        parents: [X1]
        weights: {X1: 0.3}
        noise: {distribution: gaussian, mean: 0, std: 2500}
        range: [0, 200000]        # optional declared range
    classifier:                   # optional
      form: sign_linear
      weights: [1, 5]
      bias: -225000

Datasets are CSV files with a header row of variable names; an optional
first line ``# format_version: 1`` is written and accepted.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .counterfactual import InterventionSet
from .errors import FormatError, MissingColumns, SchemaMismatch
from .feasibility import FeasibilitySpec
from .predictors import Classifier, classifier_from_dict
from .scm import (
    CATEGORICAL,
    NUMERIC,
    CausalGraph,
    NoiseSpec,
    StructuralCausalModel,
    StructuralEquation,
    VariableSchema,
    make_instance,
)

FORMAT_VERSION = 1


def _load_document(path: str | Path) -> Any:
    text = Path(path).read_text()
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _check_version(doc: Any, what: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError(f"{what} must be a mapping")
    version = doc.get("format_version")
    if version is None:
        raise FormatError(f"{what} lacks a format_version field")
    if int(version) != FORMAT_VERSION:
        raise FormatError(f"{what}: unsupported format_version {version!r}")


def scm_from_dict(doc: dict) -> tuple[StructuralCausalModel, Classifier | None]:
    _check_version(doc, "SCM spec")
    entries = doc.get("variables") or []
    variables, parents, equations = [], {}, {}
    try:
        for e in entries:
            name = str(e["name"])
            kind = e.get("kind", NUMERIC)
            rng = e.get("range")
            variables.append(VariableSchema(
                name, kind, tuple(e.get("categories", ())) if kind == CATEGORICAL else (),
                tuple(rng) if rng is not None else None, e.get("resolution"),
            ))
            parents[name] = tuple(e.get("parents", ()))
            weights = {k: tuple(v) if isinstance(v, list) else v for k, v in (e.get("weights") or {}).items()}
            noise = NoiseSpec.from_dict(e.get("noise", {"distribution": "point_mass", "value": 0.0}))
            form = e.get("form", "linear" if parents[name] else "constant")
            equations[name] = StructuralEquation(weights, e.get("intercept", 0.0), noise, form)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed SCM variable entry: {exc}") from None
    model = StructuralCausalModel(CausalGraph(tuple(variables), parents), equations)
    clf = doc.get("classifier")
    return model, (classifier_from_dict(model.variables, clf) if clf else None)


def scm_to_dict(model: StructuralCausalModel, classifier: Classifier | None = None) -> dict:
    entries = []
    for v in model.variables:
        eq = model.equations[v.name]
        e: dict[str, Any] = {"name": v.name}
        if v.is_categorical:
            e["kind"] = CATEGORICAL
            e["categories"] = list(v.categories)
        e["parents"] = list(model.graph.parents[v.name])
        if eq.weights:
            e["weights"] = {k: list(w) if isinstance(w, tuple) else w for k, w in eq.weights.items()}
        e["intercept"] = eq.intercept
        e["form"] = eq.form
        e["noise"] = eq.noise.to_dict()
        if v.declared_range is not None:
            e["range"] = list(v.declared_range)
        if v.resolution is not None:
            e["resolution"] = v.resolution
        entries.append(e)
    doc: dict[str, Any] = {"format_version": FORMAT_VERSION, "variables": entries}
    if classifier is not None:
        doc["classifier"] = classifier.to_dict()
    return doc


def load_scm(path: str | Path) -> tuple[StructuralCausalModel, Classifier | None]:
    return scm_from_dict(_load_document(path))


def save_scm(path: str | Path, model: StructuralCausalModel, classifier: Classifier | None = None) -> None:
    Path(path).write_text(yaml.safe_dump(scm_to_dict(model, classifier), sort_keys=False))


def load_classifier(path: str | Path, variables) -> Classifier:
    doc = _load_document(path)
    if isinstance(doc, dict) and "classifier" in doc:
        doc = doc["classifier"]
    return classifier_from_dict(variables, doc)


def load_feasibility(path: str | Path) -> FeasibilitySpec:
    doc = _load_document(path)
    _check_version(doc, "feasibility spec")
    return FeasibilitySpec.from_dict(doc)


def save_feasibility(path: str | Path, spec: FeasibilitySpec) -> None:
    Path(path).write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False))


def load_actions(path: str | Path) -> InterventionSet:
    doc = _load_document(path)
    if doc is None:
        return InterventionSet()
    if isinstance(doc, dict):
        doc = doc.get("actions") or []
    if not isinstance(doc, list):
        raise FormatError("action file must hold a list of {variable, kind, value} records")
    try:
        return InterventionSet.from_records(doc)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed action record: {exc}") from None


def read_dataset(
    path: str | Path, graph: CausalGraph, label_column: str | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Rows in schema order (labels mapped to category indices) and optional labels."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if lines and lines[0].startswith("#"):
        head = lines.pop(0).lstrip("#").strip()
        if head.startswith("format_version") and head.split(":")[-1].strip() != str(FORMAT_VERSION):
            raise FormatError(f"{path}: unsupported dataset {head}")
    reader = csv.DictReader(lines)
    cols = reader.fieldnames or []
    missing = [n for n in graph.names if n not in cols]
    if label_column is not None and label_column not in cols:
        missing.append(label_column)
    if missing:
        raise MissingColumns(f"{path}: missing columns {missing}")
    rows, labels = [], []
    for r in reader:
        rows.append(make_instance(graph, [r[n].strip() for n in graph.names]))
        if label_column is not None:
            labels.append(int(float(r[label_column])))
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.vstack(rows), (np.array(labels) if label_column is not None else None)


def write_dataset(
    path: str | Path,
    graph: CausalGraph,
    X: np.ndarray,
    labels: np.ndarray | None = None,
    label_column: str = "label",
) -> None:
    buf = io.StringIO()
    buf.write(f"# format_version: {FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(graph.names + ([label_column] if labels is not None else []))
    for i, row in enumerate(np.asarray(X)):
        out = [v.decode(x) if v.is_categorical else repr(float(x)) for v, x in zip(graph.variables, row)]
        if labels is not None:
            out.append(int(labels[i]))
        w.writerow(out)
    Path(path).write_text(buf.getvalue())


def parse_factual(graph: CausalGraph, text: str) -> np.ndarray:
    """Comma-separated values in schema order, or the path of a one-row CSV."""
    p = Path(text)
    if p.suffix == ".csv" and p.exists():
        X, _ = read_dataset(p, graph)
        if X.shape[0] != 1:
            raise SchemaMismatch(f"{text}: expected exactly one row, found {X.shape[0]}")
        return X[0]
    return make_instance(graph, [s.strip() for s in text.split(",")])


def dump_json(obj: Any) -> str:
    """Canonical JSON so identical inputs give byte-identical artifacts."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
