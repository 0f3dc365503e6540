"""Domain types shared across the package.

Settings are plain tuples of level indices, one per knob in space order.
Tuples already give value equality, hashing and the lexicographic total
order used for tie-breaking, so no wrapper class is needed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

KnobSetting = Tuple[int, ...]

# Slack used whenever a measured or predicted fitness is compared against a
# probability bound; grids are built from decimal text so 0.7 may arrive as
# 0.7000000000000001.
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Knob:
    name: str
    levels: Tuple[float, ...]
    accurate_level: int

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if not self.name:
            raise ValueError("knob name must be non-empty")
        if not levels:
            raise ValueError(f"knob {self.name!r} has no levels")
        if any(not math.isfinite(v) for v in levels):
            raise ValueError(f"knob {self.name!r} has non-finite levels")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"knob {self.name!r} levels must be strictly ascending")
        if not 0 <= self.accurate_level < len(levels):
            raise ValueError(
                f"knob {self.name!r}: accurate_level {self.accurate_level} out of range"
            )

    def __len__(self):
        return len(self.levels)

    @property
    def lowering_step(self) -> int:
        """Index delta that moves one step away from maximum quality.

        0 for a single-level knob. When the accurate level sits at index 0
        (e.g. decimation ratios), lowering quality means raising the value.
        """
        if len(self.levels) == 1:
            return 0
        return 1 if self.accurate_level == 0 else -1

    def lower(self, index: int) -> Optional[int]:
        """Index one quality step below ``index``, or None at the bottom."""
        step = self.lowering_step
        nxt = index + step
        if step == 0 or not 0 <= nxt < len(self.levels):
            return None
        return nxt

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        for i, v in enumerate(self.levels):
            if abs(v - value) <= tol * max(1.0, abs(v)):
                return i
        raise ValueError(f"value {value!r} is not a level of knob {self.name!r}")


@dataclass(frozen=True)
class KnobSpace:
    knobs: Tuple[Knob, ...]

    def __post_init__(self):
        knobs = tuple(self.knobs)
        object.__setattr__(self, "knobs", knobs)
        if not knobs:
            raise ValueError("a knob space needs at least one knob")
        names = [k.name for k in knobs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate knob names in {names}")

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(k.name for k in self.knobs)

    @property
    def arity(self) -> int:
        return len(self.knobs)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(k) for k in self.knobs)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def knob(self, name: str) -> Knob:
        for k in self.knobs:
            if k.name == name:
                return k
        raise KeyError(name)

    def validate(self, setting: Sequence[int]) -> KnobSetting:
        setting = tuple(int(i) for i in setting)
        if len(setting) != self.arity:
            raise ValueError(f"setting {setting} has arity {len(setting)}, expected {self.arity}")
        for idx, knob in zip(setting, self.knobs):
            if not 0 <= idx < len(knob):
                raise ValueError(f"level index {idx} invalid for knob {knob.name!r}")
        return setting

    def values(self, setting: KnobSetting) -> Tuple[float, ...]:
        return tuple(k.levels[i] for k, i in zip(self.knobs, setting))

    def from_values(self, values: Sequence[float]) -> KnobSetting:
        if len(values) != self.arity:
            raise ValueError(f"expected {self.arity} knob values, got {len(values)}")
        return tuple(k.index_of(v) for k, v in zip(self.knobs, values))

    def ordinal(self, setting: KnobSetting) -> int:
        """Position of ``setting`` in :func:`enumerate_settings` order."""
        pos = 0
        for idx, n in zip(setting, self.shape):
            pos = pos * n + idx
        return pos

    def setting_at(self, ordinal: int) -> KnobSetting:
        out = []
        for n in reversed(self.shape):
            ordinal, r = divmod(ordinal, n)
            out.append(r)
        return tuple(reversed(out))

    @cached_property
    def value_matrix(self) -> np.ndarray:
        """Knob values of every setting, rows in enumeration order."""
        grids = np.meshgrid(*[np.asarray(k.levels) for k in self.knobs], indexing="ij")
        mat = np.stack([g.reshape(-1) for g in grids], axis=1)
        mat.setflags(write=False)
        return mat


def enumerate_settings(space: KnobSpace) -> Iterator[KnobSetting]:
    """Yield every setting once, lexicographic in level indices."""
    return itertools.product(*[range(n) for n in space.shape])


def accurate_setting(space: KnobSpace) -> KnobSetting:
    return tuple(k.accurate_level for k in space.knobs)


@dataclass(frozen=True)
class Constraint:
    epsilon: float
    pi: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.pi <= 1.0:
            raise ValueError(f"pi must lie in (0, 1], got {self.pi}")


@dataclass(frozen=True)
class RunRecord:
    """One profiled execution.

    ``features`` follow the owning dataset's ``feature_names``; ``error``
    stays None until the dataset is normalized.
    """

    input_id: str
    features: Tuple[float, ...]
    setting: KnobSetting
    distance: float
    cost: float
    error: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "setting", tuple(int(i) for i in self.setting))
        if not all(math.isfinite(v) for v in self.features):
            raise ValueError(f"non-finite feature for input {self.input_id!r}")
        if not (math.isfinite(self.distance) and self.distance >= 0):
            raise ValueError(f"distance must be finite and >= 0, got {self.distance}")
        if not (math.isfinite(self.cost) and self.cost > 0):
            raise ValueError(f"cost must be finite and > 0, got {self.cost}")
        if self.error is not None and not 0.0 <= self.error <= 1.0:
            raise ValueError(f"normalized error must lie in [0, 1], got {self.error}")


@dataclass(frozen=True)
class ControlDecision:
    """A controller's answer. No setting means infeasible ("NA")."""

    setting: Optional[KnobSetting] = None
    predicted_cost: Optional[float] = None
    predicted_fitness: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.setting is not None

    @classmethod
    def infeasible(cls) -> "ControlDecision":
        return cls()

    def __str__(self):
        if not self.feasible:
            return "NA"
        return f"{self.setting} cost={self.predicted_cost:.6g} fitness={self.predicted_fitness:.6g}"
