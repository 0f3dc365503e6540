"""M5-style model trees: axis-aligned splits chosen by standard-deviation
reduction, a least-squares linear model in every node, bottom-up pruning
and leaf-to-root smoothing at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .. import kernels


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 4
    sd_floor: float = 0.05
    smoothing: float = 15.0
    prune: bool = True

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.sd_floor < 0 or self.smoothing < 0:
            raise ValueError("sd_floor and smoothing must be >= 0")


EXACT = TreeParams(min_leaf=1, sd_floor=0.0, smoothing=0.0, prune=False)


RCOND = 1e-3


def population_sd(y) -> float:
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((y - y.mean()) ** 2)))


def sdr(y, parts) -> float:
    """Standard-deviation reduction of splitting ``y`` into ``parts``."""
    n = len(y)
    return population_sd(y) - sum(len(p) / n * population_sd(p) for p in parts)


def fit_linear(X: np.ndarray, y: np.ndarray):
    """Least-squares ``(intercept, coef)``.

    Columns that are constant over the rows get a zero coefficient; the
    rest are scaled to unit range and solved on centred data. Directions
    with singular value below ``RCOND`` times the largest are dropped
    (minimum-norm), which keeps nearly collinear columns from producing
    huge opposing coefficients. Falls back to the mean when no column
    varies or the solve fails.
    """
    n, d = X.shape
    coef = np.zeros(d)
    mean_y = float(np.mean(y))
    if n == 0:
        return 0.0, coef
    xm = X.mean(axis=0)
    Xc = X - xm
    scale = np.abs(Xc).max(axis=0)
    active = scale > 1e-12 * np.maximum(1.0, np.abs(xm))
    if not active.any():
        return mean_y, coef
    A = Xc[:, active] / scale[active]
    try:
        sol, *_ = np.linalg.lstsq(A, y - mean_y, rcond=RCOND)
    except np.linalg.LinAlgError:
        return mean_y, coef
    if not np.all(np.isfinite(sol)):
        return mean_y, coef
    coef[active] = sol / scale[active]
    intercept = mean_y - float(coef @ xm)
    return intercept, coef


@dataclass
class _Node:
    n: int
    intercept: float
    coef: np.ndarray
    feature: int = -1
    threshold: float = float("nan")
    left: Optional["_Node"] = None
    right: Optional["_Node"] = None
    error: float = 0.0  # adjusted training error, set by pruning

    @property
    def is_leaf(self):
        return self.feature < 0


class ModelTree:
    """Trained model tree in flat-array form.

    Node 0 is the root. ``feature[i] < 0`` marks a leaf; otherwise rows with
    ``x[feature[i]] <= threshold[i]`` descend to ``left[i]``.
    """

    def __init__(self, feature, threshold, left, right, parent, count, intercept, coef,
                 smoothing: float = 0.0):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)
        self.intercept = np.asarray(intercept, dtype=np.float64)
        self.coef = np.ascontiguousarray(np.asarray(coef, dtype=np.float64).reshape(len(self.feature), -1))
        self.smoothing = float(smoothing)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def dim(self) -> int:
        return self.coef.shape[1]

    def leaf_index(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return int(node)

    def predict(self, X, smoothing: Optional[float] = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {X.shape[1]}")
        k = self.smoothing if smoothing is None else float(smoothing)
        return kernels.tree_predict(X, self.feature, self.threshold, self.left, self.right,
                                    self.parent, self.count, self.coef, self.intercept, k)

    def predict_one(self, x, smoothing: Optional[float] = None) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64)[None, :], smoothing)[0])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "parent": self.parent.tolist(),
            "count": self.count.tolist(),
            "intercept": self.intercept.tolist(),
            "coef": self.coef.tolist(),
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelTree":
        thr = [float("nan") if t is None else t for t in d["threshold"]]
        return cls(d["feature"], thr, d["left"], d["right"], d["parent"], d["count"],
                   d["intercept"], d["coef"], d["smoothing"])


def _adjust(err: float, n: int, v: int) -> float:
    # M5 pessimistic correction; with no spare degrees of freedom the model
    # is penalized heavily instead of dividing by zero.
    if n <= v:
        return err * 10.0
    return err * (n + v) / (n - v)


def _grow(X, y, idx, params: TreeParams, sd_root: float, depth: int) -> _Node:
    Xs, ys = X[idx], y[idx]
    intercept, coef = fit_linear(Xs, ys)
    node = _Node(n=len(idx), intercept=intercept, coef=coef)
    n = len(idx)
    sd = population_sd(ys)
    if n < 2 * params.min_leaf or sd <= 0.0 or sd < params.sd_floor * sd_root:
        return node
    yc = ys - ys.mean()
    dim, thr, gain = kernels.best_split(Xs, yc, params.min_leaf, 1e-10 * sd)
    if dim < 0:
        return node
    mask = Xs[:, dim] <= thr
    node.feature, node.threshold = int(dim), float(thr)
    node.left = _grow(X, y, idx[mask], params, sd_root, depth + 1)
    node.right = _grow(X, y, idx[~mask], params, sd_root, depth + 1)
    return node


def _prune(node: _Node, X, y, idx, tol: float) -> float:
    """Prune bottom-up; returns the node's adjusted mean absolute error.

    A subtree survives only if it beats the node's own model by more than
    ``tol``, so splits that merely shave rounding noise are removed.
    """
    Xs, ys = X[idx], y[idx]
    resid = np.abs(ys - (node.intercept + Xs @ node.coef))
    v = 1 + int(np.count_nonzero(node.coef))
    own = _adjust(float(resid.mean()) if len(ys) else 0.0, len(ys), v)
    if node.is_leaf:
        node.error = own
        return own
    mask = Xs[:, node.feature] <= node.threshold
    el = _prune(node.left, X, y, idx[mask], tol)
    er = _prune(node.right, X, y, idx[~mask], tol)
    sub = (node.left.n * el + node.right.n * er) / node.n
    if sub >= own - tol:
        node.feature, node.threshold = -1, float("nan")
        node.left = node.right = None
        node.error = own
    else:
        node.error = sub
    return node.error


def _flatten(root: _Node, smoothing: float) -> ModelTree:
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    parent: List[int] = []
    count: List[int] = []
    intercept: List[float] = []
    coef: List[np.ndarray] = []

    def add(node: _Node, par: int) -> int:
        i = len(feature)
        feature.append(node.feature)
        threshold.append(node.threshold)
        left.append(-1)
        right.append(-1)
        parent.append(par)
        count.append(node.n)
        intercept.append(node.intercept)
        coef.append(node.coef)
        if not node.is_leaf:
            left[i] = add(node.left, i)
            right[i] = add(node.right, i)
        return i

    add(root, -1)
    return ModelTree(feature, threshold, left, right, parent, count, intercept,
                     np.vstack(coef), smoothing)


def train_model_tree(X, y, params: TreeParams = TreeParams()) -> ModelTree:
    """Fit a model tree to rows ``X`` and targets ``y``.

    Splits maximize standard-deviation reduction (population sd), with ties
    going to the lowest dimension and then the lowest threshold. Growth
    stops below ``2 * min_leaf`` points or when the node's sd falls under
    ``sd_floor`` times the root's.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    if len(y) == 0:
        raise ValueError("cannot train a model tree on zero points")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise ValueError("training data must be finite")
    idx = np.arange(len(y))
    root = _grow(X, y, idx, params, population_sd(y), 0)
    if params.prune:
        _prune(root, X, y, idx, 1e-9 * max(1.0, float(np.mean(np.abs(y)))))
    return _flatten(root, params.smoothing)
