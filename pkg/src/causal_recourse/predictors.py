"""Fixed binary classifiers ``h`` whose unfavorable decisions trigger recourse.

Labels are ints: ``FAVORABLE = 1``, ``UNFAVORABLE = 0``.  Categorical inputs
are dummy-coded exactly as in :func:`causal_recourse.scm.dummy_encode`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateLabels, FormatError, SchemaMismatch
from .scm import VariableSchema, dummy_columns, dummy_encode

FAVORABLE = 1
UNFAVORABLE = 0


class Classifier:
    """Base class; subclasses implement :meth:`decision_function`.

    The decision score is >= 0 exactly on the favorable side, so it doubles
    as a signed margin when reporting how far a search fell short.
    """

    variables: tuple[VariableSchema, ...]

    def _design(self, X: Any) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (len(self.variables),):
            raise SchemaMismatch(f"classifier expects {len(self.variables)} features, got shape {X.shape}")
        return dummy_encode(self.variables, X)

    def decision_function(self, X: Any) -> np.ndarray:
        raise NotImplementedError

    def predict_batch(self, X: Any) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(int)

    def predict(self, x: Any) -> int:
        return int(self.predict_batch(np.atleast_2d(x))[0])

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_weights(variables, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(dummy_columns(variables)),):
        raise SchemaMismatch(
            f"weight vector has {weights.size} entries, encoded feature dimension is {len(dummy_columns(variables))}"
        )
    return weights


@dataclass(frozen=True, eq=False)
class SignLinear(Classifier):
    """favorable iff ``w . x + b >= 0`` (sgn(0) counts as favorable)."""

    variables: tuple[VariableSchema, ...]
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "weights", _check_weights(self.variables, self.weights))
        object.__setattr__(self, "bias", float(self.bias))

    def decision_function(self, X):
        return self._design(X) @ self.weights + self.bias

    def to_dict(self):
        return {"form": "sign_linear", "weights": self.weights.tolist(), "bias": self.bias}


@dataclass(frozen=True, eq=False)
class Logistic(Classifier):
    variables: tuple[VariableSchema, ...]
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "weights", _check_weights(self.variables, self.weights))
        object.__setattr__(self, "bias", float(self.bias))
        if not 0.0 < self.threshold < 1.0:
            raise SchemaMismatch("logistic threshold must lie in (0, 1)")

    def probability(self, X) -> np.ndarray:
        z = self._design(X) @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-z))

    def decision_function(self, X):
        # sigmoid(z) >= t  <=>  z >= logit(t)
        logit_t = math.log(self.threshold / (1.0 - self.threshold))
        return self._design(X) @ self.weights + self.bias - logit_t

    def to_dict(self):
        return {"form": "logistic", "weights": self.weights.tolist(), "bias": self.bias,
                "threshold": self.threshold}


@dataclass(frozen=True)
class TreeNode:
    """Internal node when ``label`` is None: go left iff ``x[feature] <= threshold``."""

    label: int | None = None
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"label": self.label}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "TreeNode":
        if "label" in d:
            return cls(label=int(d["label"]))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


@dataclass(frozen=True, eq=False)
class Tree(Classifier):
    """Axis-aligned binary tree over the dummy-coded features."""

    variables: tuple[VariableSchema, ...]
    root: TreeNode = field(default_factory=lambda: TreeNode(label=UNFAVORABLE))

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        width = len(dummy_columns(self.variables))

        def check(node, depth):
            if depth > 64:
                raise SchemaMismatch("tree is too deep")
            if node.is_leaf:
                if node.label not in (FAVORABLE, UNFAVORABLE):
                    raise SchemaMismatch("tree leaves must carry a binary label")
                return
            if node.left is None or node.right is None or not 0 <= node.feature < width:
                raise SchemaMismatch("malformed tree node")
            check(node.left, depth + 1)
            check(node.right, depth + 1)

        check(self.root, 0)

    def decision_function(self, X):
        D = self._design(X)
        out = np.empty(D.shape[0])

        def walk(node, idx):
            if node.is_leaf:
                out[idx] = 1.0 if node.label == FAVORABLE else -1.0
                return
            go_left = D[idx, node.feature] <= node.threshold
            walk(node.left, idx[go_left])
            walk(node.right, idx[~go_left])

        walk(self.root, np.arange(D.shape[0]))
        return out

    def to_dict(self):
        return {"form": "tree", "root": self.root.to_dict()}


def predict(h: Classifier, x: Any) -> int:
    return h.predict(x)


def classifier_from_dict(variables: Sequence[VariableSchema], d: dict) -> Classifier:
    form = d.get("form")
    if form == "sign_linear":
        return SignLinear(tuple(variables), d["weights"], d.get("bias", 0.0))
    if form == "logistic":
        return Logistic(tuple(variables), d["weights"], d.get("bias", 0.0), d.get("threshold", 0.5))
    if form == "tree":
        return Tree(tuple(variables), TreeNode.from_dict(d["root"]))
    raise FormatError(f"unknown classifier form {form!r}")


# --- training -------------------------------------------------------------

def train(
    form: str,
    variables: Sequence[VariableSchema],
    X: Any,
    y: Any,
    seed: int = 0,
    *,
    threshold: float = 0.5,
    l2: float = 1e-4,
    tol: float = 1e-7,
    max_iter: int = 20000,
    max_depth: int = 4,
    min_leaf: int = 1,
) -> Classifier:
    """Fit a logistic regression or a gini tree (``form`` in {"logistic", "tree"})."""
    variables = tuple(variables)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise SchemaMismatch("training data must be a non-empty matrix with one label per row")
    if not set(np.unique(y)) <= {0, 1}:
        raise SchemaMismatch("labels must be binary 0/1")
    if np.unique(y).size < 2:
        raise DegenerateLabels("training labels contain a single class")
    D = dummy_encode(variables, X)
    if form == "logistic":
        w, b = _fit_logistic(D, y, seed, l2=l2, tol=tol, max_iter=max_iter)
        return Logistic(variables, w, b, threshold)
    if form == "tree":
        return Tree(variables, _grow_tree(D, y, max_depth, min_leaf))
    raise FormatError(f"cannot train classifier form {form!r}")


def _fit_logistic(D, y, seed, *, l2, tol, max_iter):
    # full-batch gradient descent on standardized features, folded back to raw units
    mu = D.mean(axis=0)
    sd = D.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (D - mu) / sd
    n, p = Z.shape
    rng = np.random.default_rng(seed)
    w = 1e-3 * rng.standard_normal(p)
    b = 0.0
    # step 1/L with L the smoothness constant of the regularized loss
    lr = 1.0 / (0.25 * (np.linalg.norm(Z, 2) ** 2 / n + 1.0) + l2)
    for _ in range(max_iter):
        prob = 1.0 / (1.0 + np.exp(-(Z @ w + b)))
        r = prob - y
        gw = Z.T @ r / n + l2 * w
        gb = r.mean()
        w -= lr * gw
        b -= lr * gb
        if math.sqrt(gw @ gw + gb * gb) < tol:
            break
    w_raw = w / sd
    return w_raw, float(b - mu @ w_raw)


def _grow_tree(D, y, max_depth, min_leaf) -> TreeNode:
    majority = FAVORABLE if 2 * y.sum() >= y.size else UNFAVORABLE
    if max_depth == 0 or y.min() == y.max() or y.size < 2 * min_leaf:
        return TreeNode(label=majority)
    n = y.size
    p = y.mean()
    parent = 1.0 - p * p - (1.0 - p) ** 2
    best = None
    for f in range(D.shape[1]):
        order = np.argsort(D[:, f], kind="stable")
        xs, ys = D[order, f], y[order]
        pos_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        pos_right = ys.sum() - pos_left
        n_right = n - n_left
        p_l, p_r = pos_left / n_left, pos_right / n_right
        gini = (n_left * (1 - p_l**2 - (1 - p_l) ** 2) + n_right * (1 - p_r**2 - (1 - p_r) ** 2)) / n
        gini = np.where(valid, gini, np.inf)
        k = int(np.argmin(gini))
        if best is None or gini[k] < best[0] - 1e-12:
            best = (gini[k], f, 0.5 * (xs[k] + xs[k + 1]))
    # an XOR split has zero immediate gain but is still needed one level down
    if best is None or best[0] > parent + 1e-12:
        return TreeNode(label=majority)
    _, f, thr = best
    left = D[:, f] <= thr
    return TreeNode(
        feature=f,
        threshold=float(thr),
        left=_grow_tree(D[left], y[left], max_depth - 1, min_leaf),
        right=_grow_tree(D[~left], y[~left], max_depth - 1, min_leaf),
    )
