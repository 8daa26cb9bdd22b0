"""Additive-noise structural causal models over a DAG.

Instances are 1-D float arrays (2-D for datasets) laid out in the declaration
order of ``graph.variables``; categorical values are stored as category
indices.  Every structural equation has the form ``x_i = f_i(pa_i) + u_i`` so
abduction is a subtraction and prediction is a forward pass in topological
order.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    CyclicGraph,
    DanglingParent,
    EmptyDataset,
    EquationArityMismatch,
    SchemaMismatch,
    SingularDesign,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

ROUNDTRIP_TOL = 1e-9


@dataclass(frozen=True)
class VariableSchema:
    name: str
    kind: str = NUMERIC
    categories: tuple[str, ...] = ()
    declared_range: tuple[float, float] | None = None
    # smallest meaningful change (e.g. 1 for age in years); None = continuous
    resolution: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaMismatch(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL and len(self.categories) < 2:
            raise SchemaMismatch(f"{self.name}: categorical needs at least 2 categories")
        if self.kind == NUMERIC and self.categories:
            raise SchemaMismatch(f"{self.name}: numeric variable cannot list categories")
        if self.declared_range is not None:
            lo, hi = (float(v) for v in self.declared_range)
            if not lo <= hi:
                raise SchemaMismatch(f"{self.name}: declared range has lo > hi")
            object.__setattr__(self, "declared_range", (lo, hi))
        if self.resolution is not None and not self.resolution > 0:
            raise SchemaMismatch(f"{self.name}: resolution must be positive")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def encode(self, value: Any) -> float:
        """Map a label (or number) to the stored float representation."""
        if not self.is_categorical:
            try:
                return float(value)
            except (TypeError, ValueError):
                raise SchemaMismatch(f"{self.name}: {value!r} is not numeric") from None
        if isinstance(value, str):
            if value in self.categories:
                return float(self.categories.index(value))
            try:
                value = float(value)
            except ValueError:
                raise SchemaMismatch(
                    f"{self.name}: unknown category {value!r} (expected one of {list(self.categories)})"
                ) from None
        idx = float(value)
        if idx != int(idx) or not 0 <= idx < len(self.categories):
            raise SchemaMismatch(f"{self.name}: category index {value!r} out of range")
        return idx

    def decode(self, value: float) -> Any:
        if self.is_categorical:
            return self.categories[int(round(value))]
        return float(value)


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of one exogenous variable, in the units of its endogenous child."""

    distribution: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        d, p = self.distribution, dict(self.params)
        if d == "gaussian":
            p = {"mean": float(p.get("mean", 0.0)), "std": float(p.get("std", 1.0))}
            if not p["std"] >= 0 or not math.isfinite(p["mean"]):
                raise SchemaMismatch("gaussian noise needs finite mean and std >= 0")
        elif d == "scaled_poisson":
            p = {"scale": float(p.get("scale", 1.0)), "rate": float(p["rate"])}
            if not p["rate"] > 0 or not math.isfinite(p["scale"]):
                raise SchemaMismatch("scaled_poisson noise needs rate > 0 and finite scale")
        elif d == "point_mass":
            p = {"value": float(p.get("value", 0.0))}
        elif d == "categorical":
            probs = tuple(float(v) for v in p["probabilities"])
            if any(v < 0 for v in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
                raise SchemaMismatch("categorical noise probabilities must be >= 0 and sum to 1")
            p = {"probabilities": probs}
        else:
            raise SchemaMismatch(f"unknown noise distribution {d!r}")
        object.__setattr__(self, "params", p)

    @classmethod
    def gaussian(cls, mean: float = 0.0, std: float = 1.0) -> "NoiseSpec":
        return cls("gaussian", {"mean": mean, "std": std})

    @classmethod
    def scaled_poisson(cls, scale: float, rate: float) -> "NoiseSpec":
        return cls("scaled_poisson", {"scale": scale, "rate": rate})

    @classmethod
    def point_mass(cls, value: float = 0.0) -> "NoiseSpec":
        return cls("point_mass", {"value": value})

    @classmethod
    def categorical(cls, probabilities: Sequence[float]) -> "NoiseSpec":
        return cls("categorical", {"probabilities": tuple(probabilities)})

    @property
    def mean(self) -> float:
        p = self.params
        if self.distribution == "gaussian":
            return p["mean"]
        if self.distribution == "scaled_poisson":
            return p["scale"] * p["rate"]
        if self.distribution == "point_mass":
            return p["value"]
        return float(np.dot(np.arange(len(p["probabilities"])), p["probabilities"]))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.distribution == "gaussian":
            return p["mean"] + p["std"] * rng.standard_normal(n)
        if self.distribution == "scaled_poisson":
            return p["scale"] * rng.poisson(p["rate"], n).astype(float)
        if self.distribution == "point_mass":
            return np.full(n, p["value"])
        probs = np.asarray(p["probabilities"])
        return rng.choice(len(probs), size=n, p=probs).astype(float)

    def to_dict(self) -> dict:
        out = {"distribution": self.distribution}
        out.update({k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()})
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NoiseSpec":
        d = dict(d)
        return cls(d.pop("distribution"), d)


@dataclass(frozen=True)
class StructuralEquation:
    """``x = intercept + sum_j w_j * pa_j + u``.

    A categorical parent carries one offset per category instead of a scalar
    weight (reference coding: the first category's offset is normally 0).
    """

    weights: Mapping[str, float | tuple[float, ...]] = field(default_factory=dict)
    intercept: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec.point_mass)
    form: str = "linear"

    def __post_init__(self):
        w = {k: (tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else float(v))
             for k, v in dict(self.weights).items()}
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))
        if self.form not in ("linear", "constant"):
            raise EquationArityMismatch(f"unknown equation form {self.form!r}")
        if self.form == "constant" and w:
            raise EquationArityMismatch("a constant equation takes no parents")

    def mechanism(self, parents: Mapping[str, np.ndarray | float]) -> np.ndarray | float:
        """Evaluate ``f(pa)`` (everything except the noise term)."""
        total: np.ndarray | float = self.intercept
        for name, w in self.weights.items():
            v = parents[name]
            if isinstance(w, tuple):
                total = total + np.asarray(w)[np.asarray(v).astype(int)]
            else:
                total = total + w * v
        return total


@dataclass(frozen=True)
class CausalGraph:
    variables: tuple[VariableSchema, ...]
    parents: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"variable names must be unique: {names}")
        object.__setattr__(
            self, "parents", {v.name: tuple(self.parents.get(v.name, ())) for v in self.variables}
        )

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def dim(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaMismatch(f"unknown variable {name!r}") from None

    def schema(self, name: str) -> VariableSchema:
        return self.variables[self.index(name)]

    def children(self, name: str) -> list[str]:
        return [c for c, ps in self.parents.items() if name in ps]

    def descendants(self, name: str) -> set[str]:
        out, stack = set(), [name]
        while stack:
            for c in self.children(stack.pop()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out

    def ancestors(self, name: str) -> set[str]:
        out, stack = set(), [name]
        while stack:
            for p in self.parents.get(stack.pop(), ()):
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def is_root(self, name: str) -> bool:
        return not self.parents[name]

    def topological_order(self) -> list[str]:
        """Kahn's algorithm; ties resolved by declaration order."""
        names = self.names
        if len(set(names)) != len(names):
            raise SchemaMismatch("variable names must be unique")
        pos = {n: i for i, n in enumerate(names)}
        indeg = {}
        for n in names:
            for p in self.parents[n]:
                if p not in pos:
                    raise DanglingParent(f"{n}: parent {p!r} is not a declared variable")
            indeg[n] = len(set(self.parents[n]))
        heap = [pos[n] for n in names if indeg[n] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            n = names[heapq.heappop(heap)]
            order.append(n)
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, pos[c])
        if len(order) != len(names):
            cyc = sorted(set(names) - set(order), key=pos.get)
            raise CyclicGraph(f"graph has a cycle through {cyc}")
        return order


@dataclass(frozen=True)
class StructuralCausalModel:
    graph: CausalGraph
    equations: Mapping[str, StructuralEquation]

    def __post_init__(self):
        object.__setattr__(self, "equations", dict(self.equations))
        object.__setattr__(self, "_order", tuple(validate(self)))

    @property
    def names(self) -> list[str]:
        return self.graph.names

    @property
    def variables(self) -> tuple[VariableSchema, ...]:
        return self.graph.variables

    @property
    def dim(self) -> int:
        return self.graph.dim

    @property
    def order(self) -> tuple[str, ...]:
        return self._order

    def index(self, name: str) -> int:
        return self.graph.index(name)

    def mechanism(self, name: str, X: np.ndarray) -> np.ndarray | float:
        """``f_name`` evaluated on the parent columns of ``X`` (1-D or 2-D)."""
        eq = self.equations[name]
        if X.ndim == 1:
            pa = {p: X[self.index(p)] for p in eq.weights}
        else:
            pa = {p: X[:, self.index(p)] for p in eq.weights}
        return eq.mechanism(pa)


def validate(model: StructuralCausalModel) -> list[str]:
    """Check the model and return a topological order of its variable names."""
    graph = model.graph
    order = graph.topological_order()
    missing = set(graph.names) - set(model.equations)
    extra = set(model.equations) - set(graph.names)
    if missing or extra:
        raise EquationArityMismatch(
            f"equations must match variables (missing {sorted(missing)}, extra {sorted(extra)})"
        )
    for v in graph.variables:
        eq = model.equations[v.name]
        parents = graph.parents[v.name]
        if set(eq.weights) != set(parents) or len(eq.weights) != len(parents):
            raise EquationArityMismatch(
                f"{v.name}: {len(eq.weights)} weights for parents {list(parents)}"
            )
        if v.is_categorical and parents:
            raise SchemaMismatch(f"{v.name}: categorical variables must be root nodes")
        for p, w in eq.weights.items():
            ps = graph.schema(p)
            if ps.is_categorical != isinstance(w, tuple):
                raise EquationArityMismatch(f"{v.name}: weight shape for parent {p!r} does not match its kind")
            if ps.is_categorical and len(w) != len(ps.categories):
                raise EquationArityMismatch(f"{v.name}: need one offset per category of {p!r}")
    return order


def make_instance(graph: CausalGraph, values: Sequence[Any] | Mapping[str, Any]) -> np.ndarray:
    """Build a schema-checked instance from labels/numbers (sequence or mapping)."""
    if isinstance(values, Mapping):
        unknown = set(values) - set(graph.names)
        if unknown or len(values) != graph.dim:
            raise SchemaMismatch(f"instance keys {sorted(values)} do not match {graph.names}")
        values = [values[n] for n in graph.names]
    values = list(values)
    if len(values) != graph.dim:
        raise SchemaMismatch(f"instance has {len(values)} values, schema has {graph.dim}")
    return np.array([v.encode(x) for v, x in zip(graph.variables, values)], dtype=float)


def check_instance(graph: CausalGraph, x: Any) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (graph.dim,) or x.ndim not in (1, 2):
        raise SchemaMismatch(f"expected {graph.dim} columns, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise SchemaMismatch("instance contains non-finite values")
    for j, v in enumerate(graph.variables):
        if v.is_categorical:
            col = x[..., j]
            if np.any(col != np.round(col)) or np.any(col < 0) or np.any(col >= len(v.categories)):
                raise SchemaMismatch(f"{v.name}: category index out of range")
    return x


def describe_instance(graph: CausalGraph, x: np.ndarray) -> dict[str, Any]:
    return {v.name: v.decode(x[j]) for j, v in enumerate(graph.variables)}


def abduct(model: StructuralCausalModel, factual: Any) -> np.ndarray:
    """Exogenous values that reproduce ``factual``: ``u_i = x_i - f_i(pa_i)``."""
    x = check_instance(model.graph, factual)
    u = np.empty_like(x)
    for name in model.order:
        j = model.index(name)
        u[..., j] = x[..., j] - model.mechanism(name, x)
    return u


def evaluate(model: StructuralCausalModel, exogenous: Any) -> np.ndarray:
    """Forward pass ``x = F(u)`` in topological order."""
    u = np.asarray(exogenous, dtype=float)
    if u.shape[-1:] != (model.dim,):
        raise SchemaMismatch(f"exogenous vector must have {model.dim} entries")
    x = np.zeros_like(u)
    for name in model.order:
        j = model.index(name)
        x[..., j] = model.mechanism(name, x) + u[..., j]
    return x


def sample(model: StructuralCausalModel, n: int, seed: int = 0) -> np.ndarray:
    if n < 1:
        raise EmptyDataset("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    u = np.zeros((n, model.dim))
    for name in model.order:
        u[:, model.index(name)] = model.equations[name].noise.sample(rng, n)
    return evaluate(model, u)


def dummy_columns(variables: Sequence[VariableSchema]) -> list[tuple[int, int | None]]:
    """Design-matrix layout: (variable index, category or None) per column.

    Categoricals use reference coding: one indicator per non-first category.
    """
    cols: list[tuple[int, int | None]] = []
    for j, v in enumerate(variables):
        if v.is_categorical:
            cols.extend((j, k) for k in range(1, len(v.categories)))
        else:
            cols.append((j, None))
    return cols


def dummy_encode(variables: Sequence[VariableSchema], X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = dummy_columns(variables)
    out = np.empty((X.shape[0], len(cols)))
    for c, (j, k) in enumerate(cols):
        out[:, c] = X[:, j] if k is None else (X[:, j] == k).astype(float)
    return out


def fit_linear_sem(
    graph: CausalGraph,
    data: Any,
    root_noise: Mapping[str, NoiseSpec] | None = None,
) -> StructuralCausalModel:
    """Least-squares fit of every child on its parents.

    Non-root noise is gaussian with the residual mean/std.  Roots become
    ``X := U`` with ``U`` moment-matched to the empirical marginal (or the
    empirical category frequencies for categoricals) unless ``root_noise``
    supplies a distribution.
    """
    graph.topological_order()
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyDataset("dataset is empty")
    data = check_instance(graph, data)
    root_noise = dict(root_noise or {})
    equations = {}
    for j, v in enumerate(graph.variables):
        parents = graph.parents[v.name]
        y = data[:, j]
        if not parents:
            if v.name in root_noise:
                noise = root_noise[v.name]
            elif v.is_categorical:
                counts = np.bincount(y.astype(int), minlength=len(v.categories))
                noise = NoiseSpec.categorical(counts / counts.sum())
            else:
                noise = NoiseSpec.gaussian(float(y.mean()), float(y.std()))
            equations[v.name] = StructuralEquation({}, 0.0, noise, form="constant")
            continue
        pa_vars = [graph.schema(p) for p in parents]
        pa_data = data[:, [graph.index(p) for p in parents]]
        design = dummy_encode(pa_vars, pa_data)
        mean = design.mean(axis=0)
        centered = design - mean
        if data.shape[0] <= design.shape[1] or np.linalg.matrix_rank(centered) < design.shape[1]:
            raise SingularDesign(f"{v.name}: parent design matrix is rank deficient")
        coef, *_ = np.linalg.lstsq(centered, y - y.mean(), rcond=None)
        intercept = float(y.mean() - mean @ coef)
        weights: dict[str, float | tuple[float, ...]] = {}
        c = 0
        for p in pa_vars:
            if p.is_categorical:
                k = len(p.categories) - 1
                weights[p.name] = (0.0, *(float(w) for w in coef[c:c + k]))
                c += k
            else:
                weights[p.name] = float(coef[c])
                c += 1
        resid = y - (intercept + design @ coef)
        equations[v.name] = StructuralEquation(
            weights, intercept, NoiseSpec.gaussian(float(resid.mean()), float(resid.std()))
        )
    return StructuralCausalModel(graph, equations)
