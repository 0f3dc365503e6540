"""Fitness models: the probability mass of inputs whose error stays within
a bound, as a function of the bound and the knob setting.
"""

from __future__ import annotations

import warnings
from functools import cached_property
from typing import Sequence

import numpy as np

from .. import kernels
from ..core import KnobSetting, KnobSpace
from ..dataset import Dataset
from .base import FitnessModel
from .tree import ModelTree, TreeParams, fit_linear, train_model_tree

# Slack on "error <= epsilon": grid values are parsed from decimal text.
ERROR_TOL = 1e-12


class MissingProfileWarning(UserWarning):
    pass


def _grid(epsilon_grid) -> np.ndarray:
    g = np.asarray(sorted(float(e) for e in epsilon_grid), dtype=np.float64)
    if g.size == 0:
        raise ValueError("epsilon grid is empty")
    if np.any(np.diff(g) <= 0):
        raise ValueError("epsilon grid has duplicates")
    return g


def grid_index(grid: np.ndarray, epsilon: float) -> int:
    """Index of the largest grid value <= epsilon, or -1 below the grid."""
    return int(np.searchsorted(grid, epsilon + ERROR_TOL, side="right")) - 1


def measured_fitness(ds: Dataset, epsilons) -> np.ndarray:
    """Exact fitness of every setting over the inputs of ``ds``.

    Returns (settings, len(epsilons)). Inputs that never ran a setting add
    no mass to it but still count in the total.
    """
    eps = np.atleast_1d(np.asarray(epsilons, dtype=np.float64))
    return kernels.fitness_mass(ds.error_matrix, eps, ds.input_weights(), ERROR_TOL)


class FitnessTable(FitnessModel):
    """Explicit (setting x epsilon-bin) table of fitness values.

    Queries between grid points use the nearest grid value below, which
    never overstates fitness; queries below the grid return 0.
    """

    def __init__(self, space: KnobSpace, epsilon_grid: Sequence[float], table, input_weights=None):
        self.space = space
        self.epsilon_grid = _grid(epsilon_grid)
        self.table = np.asarray(table, dtype=np.float64)
        if self.table.shape != (space.size, self.epsilon_grid.size):
            raise ValueError(f"table shape {self.table.shape} does not match space x grid")
        self.table.setflags(write=False)
        self.input_weights = dict(input_weights or {})

    def column(self, epsilon: float) -> np.ndarray:
        j = grid_index(self.epsilon_grid, epsilon)
        if j < 0:
            return np.zeros(self.space.size)
        return self.table[:, j]

    def fitness(self, epsilon, setting):
        return float(self.column(epsilon)[self.space.ordinal(setting)])

    def fitness_all(self, epsilon):
        return self.column(epsilon)

    def row(self, setting: KnobSetting) -> np.ndarray:
        return self.table[self.space.ordinal(setting)]


def train_fitness_table(train: Dataset, epsilon_grid) -> FitnessTable:
    """Tabulate, for each setting and bound, the summed probability of the
    training inputs whose measured error is within the bound."""
    if not train.is_normalized:
        raise ValueError("training data must be normalized")
    grid = _grid(epsilon_grid)
    errors = train.error_matrix
    profiled = ~np.isnan(errors)
    partial = profiled.any(axis=1) & ~profiled.all(axis=1)
    if partial.any():
        warnings.warn(
            f"{int(partial.sum())} settings lack records for some training inputs; "
            "those inputs contribute no fitness mass there",
            MissingProfileWarning,
            stacklevel=2,
        )
    w = train.input_weights()
    table = kernels.fitness_mass(errors, grid, w, ERROR_TOL)
    total = float(np.add.accumulate(w)[-1])
    weights = {i: float(wi) / total for i, wi in zip(train.inputs, w)}
    return FitnessTable(train.space, grid, table, weights)


class M5FitnessModel(FitnessModel):
    """Model tree over (knob values, epsilon), clamped to [0, 1] and made
    monotone in epsilon by a running maximum along the grid."""

    def __init__(self, space: KnobSpace, epsilon_grid, tree: ModelTree):
        if tree.dim != space.arity + 1:
            raise ValueError("fitness tree must take knob values plus epsilon")
        self.space = space
        self.epsilon_grid = _grid(epsilon_grid)
        self.tree = tree

    @cached_property
    def grid_values(self) -> np.ndarray:
        vals = self.space.value_matrix
        ns, ne = vals.shape[0], self.epsilon_grid.size
        rows = np.hstack([np.repeat(vals, ne, axis=0), np.tile(self.epsilon_grid, ns)[:, None]])
        pred = np.clip(self.tree.predict(rows), 0.0, 1.0).reshape(ns, ne)
        out = np.maximum.accumulate(pred, axis=1)
        out.setflags(write=False)
        return out

    def fitness_all(self, epsilon):
        j = grid_index(self.epsilon_grid, epsilon)
        if j < 0:
            return np.zeros(self.space.size)
        return self.grid_values[:, j]

    def fitness(self, epsilon, setting):
        return float(self.fitness_all(epsilon)[self.space.ordinal(setting)])


def table_points(table: FitnessTable):
    """(knob values..., epsilon) rows with the table entries as targets."""
    vals = table.space.value_matrix
    ns, ne = vals.shape[0], table.epsilon_grid.size
    X = np.hstack([np.repeat(vals, ne, axis=0), np.tile(table.epsilon_grid, ns)[:, None]])
    return np.ascontiguousarray(X), table.table.reshape(-1)


def train_fitness_m5(train: Dataset, epsilon_grid, params: TreeParams = TreeParams()) -> M5FitnessModel:
    table = train_fitness_table(train, epsilon_grid)
    X, y = table_points(table)
    return M5FitnessModel(train.space, table.epsilon_grid, train_model_tree(X, y, params))


class LinearFitnessModel(FitnessModel):
    """Global plane over (knob values, epsilon), clamped to [0, 1]."""

    def __init__(self, space: KnobSpace, intercept: float, coef):
        self.space = space
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=np.float64)

    def fitness_all(self, epsilon):
        vals = self.space.value_matrix
        raw = self.intercept + vals @ self.coef[:-1] + self.coef[-1] * float(epsilon)
        return np.clip(raw, 0.0, 1.0)

    def fitness(self, epsilon, setting):
        x = np.asarray(self.space.values(setting), dtype=np.float64)
        raw = self.intercept + float(x @ self.coef[:-1]) + self.coef[-1] * float(epsilon)
        return float(min(1.0, max(0.0, raw)))


def train_linear_fitness(train: Dataset, epsilon_grid) -> LinearFitnessModel:
    table = train_fitness_table(train, epsilon_grid)
    X, y = table_points(table)
    intercept, coef = fit_linear(X, y)
    return LinearFitnessModel(train.space, intercept, coef)
