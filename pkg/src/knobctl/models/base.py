from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from ..core import KnobSetting, KnobSpace, enumerate_settings

# Predicted costs never drop below this; linear leaves may extrapolate
# through zero.
COST_FLOOR = 1e-9


class CostModel(ABC):
    """Proxy for the cost of running one input at one knob setting."""

    space: KnobSpace

    @abstractmethod
    def predict(self, features: Sequence[float], setting: KnobSetting) -> float:
        ...

    def predict_all(self, features: Sequence[float]) -> np.ndarray:
        """Predictions for every setting of ``space`` in enumeration order."""
        return np.array([self.predict(features, k) for k in enumerate_settings(self.space)])


class FitnessModel(ABC):
    """Proxy for the probability mass of inputs meeting an error bound."""

    space: KnobSpace

    @abstractmethod
    def fitness(self, epsilon: float, setting: KnobSetting) -> float:
        ...

    def fitness_all(self, epsilon: float) -> np.ndarray:
        return np.array([self.fitness(epsilon, k) for k in enumerate_settings(self.space)])


def design_rows(space: KnobSpace, features: Sequence[float]) -> np.ndarray:
    """Regression rows (features then knob values) for every setting."""
    vals = space.value_matrix
    feats = np.broadcast_to(np.asarray(features, dtype=np.float64), (vals.shape[0], len(features)))
    return np.ascontiguousarray(np.hstack([feats, vals]))
