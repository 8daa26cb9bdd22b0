"""Structural counterfactuals via abduction, action and prediction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import SchemaMismatch, SoftOnCategorical
from .scm import StructuralCausalModel, abduct, check_instance

HARD = "hard"
SOFT = "soft"
KINDS = (HARD, SOFT)


@dataclass(frozen=True)
class Intervention:
    """``do(X := value)`` when hard; ``X += value`` on top of the mechanism when soft."""

    variable: str
    kind: str
    value: Any

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaMismatch(f"unknown intervention kind {self.kind!r}")

    def to_record(self) -> dict:
        return {"variable": self.variable, "kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class InterventionSet:
    interventions: tuple[Intervention, ...] = ()

    def __post_init__(self):
        items = tuple(self.interventions)
        names = [i.variable for i in items]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"at most one intervention per variable, got {names}")
        object.__setattr__(self, "interventions", items)

    @classmethod
    def hard(cls, assignments: Mapping[str, Any]) -> "InterventionSet":
        return cls(tuple(Intervention(k, HARD, v) for k, v in assignments.items()))

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> "InterventionSet":
        return cls(tuple(Intervention(r["variable"], r.get("kind", HARD), r["value"]) for r in records))

    def to_records(self) -> list[dict]:
        return [i.to_record() for i in self.interventions]

    @property
    def variables(self) -> list[str]:
        return [i.variable for i in self.interventions]

    def __iter__(self) -> Iterator[Intervention]:
        return iter(self.interventions)

    def __len__(self) -> int:
        return len(self.interventions)

    def __bool__(self) -> bool:
        return bool(self.interventions)


@dataclass(frozen=True)
class CounterfactualResult:
    factual: np.ndarray
    exogenous: np.ndarray
    counterfactual: np.ndarray
    intervened: tuple[str, ...]


def _normalize(model: StructuralCausalModel, actions: InterventionSet) -> tuple[list[int], list[str], np.ndarray]:
    cols, kinds, values = [], [], []
    for a in actions:
        j = model.index(a.variable)
        var = model.variables[j]
        if var.is_categorical and a.kind == SOFT:
            raise SoftOnCategorical(f"{a.variable}: soft interventions on categorical variables are undefined")
        cols.append(j)
        kinds.append(a.kind)
        values.append(var.encode(a.value))
    return cols, kinds, np.array(values, dtype=float)


def counterfactual_batch(
    model: StructuralCausalModel,
    factual: np.ndarray,
    columns: Sequence[int],
    kinds: Sequence[str],
    values: np.ndarray,
) -> np.ndarray:
    """Counterfactuals of one individual under many action settings at once.

    ``values`` has one row per candidate and one column per intervened
    variable (target level for hard, offset for soft).  Each node is assigned

        hard:  a_i
        soft:  delta_i + x_i + f_i(pa_scf) - f_i(pa_f)
        other:           x_i + f_i(pa_scf) - f_i(pa_f)

    in topological order.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    X = np.tile(factual, (n, 1))
    action = {c: (k, values[:, m]) for m, (c, k) in enumerate(zip(columns, kinds))}
    for name in model.order:
        j = model.index(name)
        kind, v = action.get(j, (None, None))
        if kind == HARD:
            X[:, j] = v
            continue
        if model.equations[name].weights:
            X[:, j] = factual[j] + (model.mechanism(name, X) - model.mechanism(name, factual))
        if kind == SOFT:
            X[:, j] += v
    return X


def forward_from_noise(
    model: StructuralCausalModel,
    exogenous: np.ndarray,
    columns: Sequence[int],
    kinds: Sequence[str],
    values: np.ndarray,
) -> np.ndarray:
    """Same query answered by rewriting the equations and re-running ``F`` on ``u``.

    Kept separate from :func:`counterfactual_batch` so the two routes can
    cross-check each other.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    X = np.zeros((n, model.dim))
    action = {c: (k, values[:, m]) for m, (c, k) in enumerate(zip(columns, kinds))}
    for name in model.order:
        j = model.index(name)
        kind, v = action.get(j, (None, None))
        if kind == HARD:
            X[:, j] = v
        else:
            X[:, j] = model.mechanism(name, X) + exogenous[j]
            if kind == SOFT:
                X[:, j] += v
    return X


def compute_counterfactual(
    model: StructuralCausalModel, factual: Any, actions: InterventionSet
) -> CounterfactualResult:
    x = check_instance(model.graph, factual)
    if x.ndim != 1:
        raise SchemaMismatch("factual must be a single instance")
    u = abduct(model, x)
    cols, kinds, values = _normalize(model, actions)
    x_scf = counterfactual_batch(model, x, cols, kinds, values[None, :])[0]
    return CounterfactualResult(x, u, x_scf, tuple(actions.variables))


def affected_variables(model: StructuralCausalModel, intervened: Iterable[str] | InterventionSet) -> set[str]:
    """Descendants of the intervened set that are not themselves intervened."""
    if isinstance(intervened, InterventionSet):
        intervened = intervened.variables
    intervened = set(intervened)
    out: set[str] = set()
    for name in intervened:
        out |= model.graph.descendants(name)
    return out - intervened
