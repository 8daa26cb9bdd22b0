"""Action feasibility (what an individual can do) and plausibility (what may result)."""
from __future__ import annotations

import operator
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .counterfactual import HARD, KINDS, InterventionSet
from .errors import FormatError, SchemaMismatch
from .scm import CausalGraph

IMMUTABLE = "immutable"
NON_ACTIONABLE = "mutable_non_actionable"
ACTIONABLE = "actionable"
CLASSES = (IMMUTABLE, NON_ACTIONABLE, ACTIONABLE)

ANY = "any"
INCREASE_ONLY = "increase_only"
DECREASE_ONLY = "decrease_only"
DIRECTIONS = (ANY, INCREASE_ONLY, DECREASE_ONLY)

EQ_TOL = 1e-9

_OPS = {
    "<=": operator.le,
    ">=": operator.ge,
    "==": lambda a, b: np.abs(a - b) <= EQ_TOL,
    "!=": lambda a, b: np.abs(a - b) > EQ_TOL,
}
_OP_ALIASES = {"≤": "<=", "≥": ">=", "=": "==", "≠": "!="}


@dataclass(frozen=True)
class VariablePolicy:
    actionability: str = ACTIONABLE
    direction: str = ANY
    kinds: tuple[str, ...] = (HARD,)

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if self.actionability not in CLASSES:
            raise FormatError(f"unknown actionability class {self.actionability!r}")
        if self.direction not in DIRECTIONS:
            raise FormatError(f"unknown direction {self.direction!r}")
        if self.direction != ANY and self.actionability != ACTIONABLE:
            raise FormatError("direction constraints apply only to actionable variables")
        if not self.kinds or not set(self.kinds) <= set(KINDS):
            raise FormatError(f"allowed kinds must be a non-empty subset of {KINDS}")


@dataclass(frozen=True)
class Condition:
    """A declarative predicate over factual (``pre``) and counterfactual (``post``) values.

    ``when_intervened`` gates the condition on an intervention of that
    variable; ``None`` makes it apply to every action set.
    """

    form: str
    variable: str | None = None
    op: str | None = None
    value: Any = None
    antecedent: "Condition | None" = None
    consequent: "Condition | None" = None
    when_intervened: str | None = None

    def __post_init__(self):
        if self.form in ("bound_pre", "bound_post"):
            op = _OP_ALIASES.get(self.op, self.op)
            if op not in _OPS or self.variable is None:
                raise FormatError(f"bad bound condition ({self.variable!r}, {self.op!r})")
            object.__setattr__(self, "op", op)
        elif self.form == "implication":
            for part in (self.antecedent, self.consequent):
                if part is None or part.form == "implication":
                    raise FormatError("implications take two bound conditions (one level of nesting)")
        else:
            raise FormatError(f"unknown condition form {self.form!r}")

    @classmethod
    def pre(cls, variable, op, value, when_intervened=None) -> "Condition":
        return cls("bound_pre", variable, op, value, when_intervened=when_intervened)

    @classmethod
    def post(cls, variable, op, value, when_intervened=None) -> "Condition":
        return cls("bound_post", variable, op, value, when_intervened=when_intervened)

    @classmethod
    def implies(cls, antecedent, consequent, when_intervened=None) -> "Condition":
        return cls("implication", antecedent=antecedent, consequent=consequent,
                   when_intervened=when_intervened)

    def variables(self) -> set[str]:
        if self.form == "implication":
            return self.antecedent.variables() | self.consequent.variables()
        return {self.variable}

    def holds(self, graph: CausalGraph, factual: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Row-wise truth value over counterfactual rows ``X``."""
        if self.form == "implication":
            return ~self.antecedent.holds(graph, factual, X) | self.consequent.holds(graph, factual, X)
        j = graph.index(self.variable)
        rhs = graph.variables[j].encode(self.value)
        lhs = factual[j] if self.form == "bound_pre" else X[:, j]
        return np.broadcast_to(_OPS[self.op](lhs, rhs), (X.shape[0],)).copy()

    def describe(self) -> str:
        if self.form == "implication":
            return f"({self.antecedent.describe()}) => ({self.consequent.describe()})"
        tag = "F" if self.form == "bound_pre" else "SCF"
        return f"x^{tag}[{self.variable}] {self.op} {self.value}"

    def to_dict(self) -> dict:
        if self.form == "implication":
            d = {"implication": {"antecedent": self.antecedent.to_dict(),
                                 "consequent": self.consequent.to_dict()}}
        else:
            d = {self.form: [self.variable, self.op, self.value]}
        if self.when_intervened is not None:
            d["when_intervened"] = self.when_intervened
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Condition":
        gate = d.get("when_intervened")
        if "implication" in d:
            imp = d["implication"]
            return cls.implies(cls.from_dict(imp["antecedent"]), cls.from_dict(imp["consequent"]), gate)
        for form in ("bound_pre", "bound_post"):
            if form in d:
                var, op, value = d[form]
                return cls(form, var, op, value, when_intervened=gate)
        raise FormatError(f"cannot parse condition {dict(d)!r}")


@dataclass(frozen=True)
class FeasibilitySpec:
    """Per-variable policies (unlisted variables are actionable, any direction, hard only)."""

    policies: Mapping[str, VariablePolicy] = field(default_factory=dict)
    conditions: tuple[Condition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "policies", dict(self.policies))
        object.__setattr__(self, "conditions", tuple(self.conditions))

    def policy(self, name: str) -> VariablePolicy:
        return self.policies.get(name, VariablePolicy())

    def actionable(self, graph: CausalGraph) -> list[str]:
        return [n for n in graph.names if self.policy(n).actionability == ACTIONABLE]

    def immutable(self, graph: CausalGraph) -> list[str]:
        return [n for n in graph.names if self.policy(n).actionability == IMMUTABLE]

    def with_condition(self, condition: Condition) -> "FeasibilitySpec":
        return replace(self, conditions=self.conditions + (condition,))

    def validate_against(self, graph: CausalGraph) -> None:
        for name in self.policies:
            graph.index(name)
        for c in self.conditions:
            for name in c.variables() | ({c.when_intervened} - {None}):
                graph.index(name)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "variables": {
                n: {"class": p.actionability, "direction": p.direction, "kinds": list(p.kinds)}
                for n, p in self.policies.items()
            },
            "conditions": [c.to_dict() for c in self.conditions],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FeasibilitySpec":
        if int(d.get("format_version", 1)) != 1:
            raise FormatError(f"unsupported feasibility format_version {d.get('format_version')!r}")
        policies = {}
        for name, p in (d.get("variables") or {}).items():
            p = p or {}
            policies[name] = VariablePolicy(
                p.get("class", ACTIONABLE), p.get("direction", ANY), tuple(p.get("kinds", (HARD,)))
            )
        return cls(policies, tuple(Condition.from_dict(c) for c in d.get("conditions") or ()))


@dataclass(frozen=True)
class PlausibilitySpec:
    """Box bounds on counterfactual values; variables without a box are unconstrained."""

    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        b = {k: (float(lo), float(hi)) for k, (lo, hi) in dict(self.bounds).items()}
        for k, (lo, hi) in b.items():
            if not lo <= hi:
                raise SchemaMismatch(f"{k}: plausibility box has lo > hi")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def from_data(cls, graph: CausalGraph, data: np.ndarray) -> "PlausibilitySpec":
        data = np.asarray(data, dtype=float)
        return cls({v.name: (float(data[:, j].min()), float(data[:, j].max()))
                    for j, v in enumerate(graph.variables) if not v.is_categorical})

    @classmethod
    def from_declared(cls, graph: CausalGraph) -> "PlausibilitySpec":
        return cls({v.name: v.declared_range for v in graph.variables
                    if v.declared_range is not None and not v.is_categorical})

    def box(self, name: str) -> tuple[float, float]:
        return self.bounds.get(name, (-np.inf, np.inf))

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.bounds.items()}


@dataclass(frozen=True)
class Violation:
    kind: str
    variable: str | None
    detail: str


@dataclass(frozen=True)
class Verdict:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def ancestral_closure(spec: FeasibilitySpec, graph: CausalGraph) -> FeasibilitySpec:
    """Mark every ancestor of an immutable variable immutable too."""
    graph.topological_order()
    closed = set(spec.immutable(graph))
    for name in list(closed):
        closed |= graph.ancestors(name)
    policies = dict(spec.policies)
    for name in closed:
        if spec.policy(name).actionability != IMMUTABLE:
            policies[name] = VariablePolicy(IMMUTABLE, ANY, spec.policy(name).kinds)
    return replace(spec, policies=policies)


def static_violations(spec: FeasibilitySpec, graph: CausalGraph, actions: InterventionSet) -> list[Violation]:
    """Violations that depend only on which variables are acted on, and how."""
    out = []
    for a in actions:
        graph.index(a.variable)
        pol = spec.policy(a.variable)
        if pol.actionability == IMMUTABLE:
            out.append(Violation("immutable", a.variable, "immutable variables cannot be intervened on"))
        elif pol.actionability == NON_ACTIONABLE:
            out.append(Violation("non_actionable", a.variable, "variable may change only through its ancestors"))
        elif a.kind not in pol.kinds:
            out.append(Violation("kind", a.variable, f"{a.kind} intervention not allowed (allowed: {list(pol.kinds)})"))
    return out


def row_feasibility(
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    graph: CausalGraph,
    factual: np.ndarray,
    intervened: Iterable[str],
    X: np.ndarray,
) -> np.ndarray:
    """Row-wise mask of the value-dependent constraints for counterfactual rows ``X``."""
    ok = np.ones(X.shape[0], dtype=bool)
    for rule in _row_rules(spec, plaus, graph, factual, set(intervened), X):
        ok &= rule[2]
    return ok


def _row_rules(spec, plaus, graph, factual, intervened, X):
    for j, name in enumerate(graph.names):
        pol = spec.policy(name)
        if pol.direction == INCREASE_ONLY:
            yield "increase_only", name, X[:, j] >= factual[j]
        elif pol.direction == DECREASE_ONLY:
            yield "decrease_only", name, X[:, j] <= factual[j]
        if pol.actionability == IMMUTABLE:
            yield "immutable_changed", name, np.abs(X[:, j] - factual[j]) <= EQ_TOL
        if plaus is not None and name in plaus.bounds:
            lo, hi = plaus.bounds[name]
            yield "plausibility", name, (X[:, j] >= lo) & (X[:, j] <= hi)
    for c in spec.conditions:
        if c.when_intervened is None or c.when_intervened in intervened:
            yield "condition", c.describe(), c.holds(graph, factual, X)


def check_action(
    spec: FeasibilitySpec,
    plaus: PlausibilitySpec | None,
    graph: CausalGraph,
    factual: np.ndarray,
    actions: InterventionSet,
    counterfactual: np.ndarray,
) -> Verdict:
    """Every violated constraint of ``actions`` (``Verdict.ok`` when there are none)."""
    factual = np.asarray(factual, dtype=float)
    X = np.asarray(counterfactual, dtype=float)[None, :]
    out = static_violations(spec, graph, actions)
    for kind, label, mask in _row_rules(spec, plaus, graph, factual, set(actions.variables), X):
        if not mask[0]:
            if kind == "condition":
                out.append(Violation(kind, None, f"condition {label} fails"))
            else:
                j = graph.index(label)
                out.append(Violation(kind, label, f"{label}: {factual[j]:g} -> {X[0, j]:g}"))
    return Verdict(tuple(out))
