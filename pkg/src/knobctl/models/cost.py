from __future__ import annotations

from typing import Dict, Sequence, Tuple

import numpy as np

from ..core import KnobSetting, KnobSpace
from ..dataset import Dataset
from .base import COST_FLOOR, CostModel, design_rows
from .tree import ModelTree, TreeParams, fit_linear, train_model_tree


class TreeCostModel(CostModel):
    """Model tree over input features followed by knob values."""

    def __init__(self, space: KnobSpace, tree: ModelTree, n_features: int):
        if tree.dim != n_features + space.arity:
            raise ValueError("tree dimensionality does not match features + knobs")
        self.space = space
        self.tree = tree
        self.n_features = n_features
        self._cache: Dict[Tuple[float, ...], np.ndarray] = {}

    def predict(self, features, setting):
        x = np.asarray(tuple(features) + self.space.values(setting), dtype=np.float64)
        return max(COST_FLOOR, self.tree.predict_one(x))

    def predict_all(self, features):
        key = tuple(float(f) for f in features)
        out = self._cache.get(key)
        if out is None:
            out = np.maximum(COST_FLOOR, self.tree.predict(design_rows(self.space, key)))
            out.setflags(write=False)
            self._cache[key] = out
        return out


class LinearCostModel(CostModel):
    """Single global least-squares plane; the comparison baseline."""

    def __init__(self, space: KnobSpace, intercept: float, coef: Sequence[float]):
        self.space = space
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=np.float64)

    def raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.intercept + X @ self.coef

    def predict(self, features, setting):
        x = np.asarray(tuple(features) + self.space.values(setting), dtype=np.float64)
        return max(COST_FLOOR, float(self.raw(x)[0]))

    def predict_all(self, features):
        return np.maximum(COST_FLOOR, self.raw(design_rows(self.space, features)))


class MeasuredCostModel(CostModel):
    """Looks up measured costs, identifying the input by its feature vector.

    An exact-fit reference for sanity checks; unmeasured points predict
    +inf so they are never chosen.
    """

    def __init__(self, ds: Dataset):
        self.space = ds.space
        self._by_features = {}
        for i in ds.inputs:
            key = ds.features_of(i)
            if key in self._by_features:
                raise ValueError("inputs must have distinct feature vectors")
            self._by_features[key] = ds.cost_matrix[:, ds.inputs.index(i)]

    def predict_all(self, features):
        col = self._by_features[tuple(float(f) for f in features)]
        return np.where(np.isnan(col), np.inf, col)

    def predict(self, features, setting):
        return float(self.predict_all(features)[self.space.ordinal(setting)])


def train_cost_tree(train: Dataset, params: TreeParams = TreeParams()) -> TreeCostModel:
    X, y = train.training_points()
    return TreeCostModel(train.space, train_model_tree(X, y, params), len(train.feature_names))


def train_linear_cost(train: Dataset) -> LinearCostModel:
    X, y = train.training_points()
    intercept, coef = fit_linear(X, y)
    return LinearCostModel(train.space, intercept, coef)
