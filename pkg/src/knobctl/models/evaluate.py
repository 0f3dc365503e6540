from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..core import KnobSetting
from ..dataset import Dataset
from .base import CostModel, FitnessModel
from .fitness import measured_fitness


def evaluate_cost_accuracy(model: CostModel, test: Dataset) -> List[Tuple[float, float]]:
    """(predicted, measured) cost for every test record."""
    pairs = []
    for i in test.inputs:
        feats = test.features_of(i)
        for r in test.records_for(i):
            pairs.append((model.predict(feats, r.setting), r.cost))
    return pairs


@dataclass
class FitnessAccuracy:
    points: List[Tuple[KnobSetting, float, float, float]]  # setting, eps, predicted, measured
    skipped: int

    @property
    def pairs(self) -> List[Tuple[float, float]]:
        return [(p, m) for _, _, p, m in self.points]

    @property
    def under_prediction_fraction(self) -> float:
        """Share of points whose predicted fitness is below the measured one."""
        if not self.points:
            return 0.0
        return sum(p < m for _, _, p, m in self.points) / len(self.points)

    @property
    def mean_abs_deviation(self) -> float:
        if not self.points:
            return 0.0
        return float(np.mean([abs(p - m) for _, _, p, m in self.points]))


def evaluate_fitness_accuracy(model: FitnessModel, test: Dataset, epsilon_grid) -> FitnessAccuracy:
    """Predicted vs. measured fitness over every (setting, epsilon) grid point.

    Measured fitness is recomputed exactly over the test inputs. Settings
    not profiled on every test input are skipped and counted.
    """
    grid = sorted(float(e) for e in epsilon_grid)
    measured = measured_fitness(test, grid)
    complete = ~np.isnan(test.error_matrix).any(axis=1)
    points = []
    skipped = 0
    space = test.space
    predicted = [model.fitness_all(e) for e in grid]
    for ordinal in range(space.size):
        if not complete[ordinal]:
            skipped += 1
            continue
        k = space.setting_at(ordinal)
        for j, e in enumerate(grid):
            points.append((k, e, float(predicted[j][ordinal]), float(measured[ordinal, j])))
    return FitnessAccuracy(points, skipped)


def rmse(model: CostModel, test: Dataset) -> float:
    pairs = np.array(evaluate_cost_accuracy(model, test))
    return float(np.sqrt(np.mean((pairs[:, 0] - pairs[:, 1]) ** 2)))
