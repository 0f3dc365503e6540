"""Profile ingestion, per-input error normalization and input-level splits."""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import KnobSetting, KnobSpace, RunRecord


class ProfileError(ValueError):
    """Malformed profile data file."""


class DegenerateInputWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of run records over one knob space.

    At most one record per (input, setting); all records of an input
    carry the same feature vector. ``weights`` optionally gives the
    unnormalized probability mass of each input.
    """

    space: KnobSpace
    feature_names: Tuple[str, ...]
    records: Tuple[RunRecord, ...]
    weights: Optional[Mapping[str, float]] = None
    degenerate: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        feats: Dict[str, Tuple[float, ...]] = {}
        nf = len(self.feature_names)
        for r in self.records:
            self.space.validate(r.setting)
            if len(r.features) != nf:
                raise ValueError(
                    f"record for {r.input_id!r} has {len(r.features)} features, expected {nf}"
                )
            key = (r.input_id, r.setting)
            if key in seen:
                raise ValueError(f"duplicate record for input {r.input_id!r} setting {r.setting}")
            seen.add(key)
            prev = feats.setdefault(r.input_id, r.features)
            if prev != r.features:
                raise ValueError(f"input {r.input_id!r} has inconsistent features")
        if self.weights is not None:
            missing = set(feats) - set(self.weights)
            if missing:
                raise ValueError(f"no weight for inputs {sorted(missing)}")
            if any(not (math.isfinite(w) and w >= 0) for w in self.weights.values()):
                raise ValueError("input weights must be finite and non-negative")

    # -- views -------------------------------------------------------------

    @cached_property
    def inputs(self) -> Tuple[str, ...]:
        """Input ids, sorted."""
        return tuple(sorted({r.input_id for r in self.records}))

    @cached_property
    def _by_input(self) -> Dict[str, Dict[KnobSetting, RunRecord]]:
        out: Dict[str, Dict[KnobSetting, RunRecord]] = {i: {} for i in self.inputs}
        for r in self.records:
            out[r.input_id][r.setting] = r
        return out

    def records_for(self, input_id: str) -> List[RunRecord]:
        try:
            recs = self._by_input[input_id]
        except KeyError:
            raise KeyError(f"unknown input {input_id!r}") from None
        return [recs[k] for k in sorted(recs)]

    def lookup(self, input_id: str, setting: KnobSetting) -> Optional[RunRecord]:
        return self._by_input.get(input_id, {}).get(tuple(setting))

    def features_of(self, input_id: str) -> Tuple[float, ...]:
        recs = self._by_input.get(input_id)
        if not recs:
            raise KeyError(f"unknown input {input_id!r}")
        return next(iter(recs.values())).features

    @property
    def is_normalized(self) -> bool:
        return all(r.error is not None for r in self.records)

    def input_weights(self) -> np.ndarray:
        """Unnormalized weight per input, in ``inputs`` order."""
        if self.weights is None:
            return np.ones(len(self.inputs))
        return np.array([float(self.weights[i]) for i in self.inputs])

    def _matrix(self, attr: str) -> np.ndarray:
        mat = np.full((self.space.size, len(self.inputs)), np.nan)
        col = {i: c for c, i in enumerate(self.inputs)}
        for r in self.records:
            mat[self.space.ordinal(r.setting), col[r.input_id]] = getattr(r, attr)
        mat.setflags(write=False)
        return mat

    @cached_property
    def error_matrix(self) -> np.ndarray:
        """(settings, inputs) normalized errors; NaN where unprofiled."""
        if not self.is_normalized:
            raise ValueError("dataset is not normalized")
        return self._matrix("error")

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        """(settings, inputs) measured costs; NaN where unprofiled."""
        return self._matrix("cost")

    def subset(self, input_ids: Iterable[str]) -> "Dataset":
        keep = set(input_ids)
        unknown = keep - set(self.inputs)
        if unknown:
            raise KeyError(f"unknown inputs {sorted(unknown)}")
        weights = None if self.weights is None else {i: self.weights[i] for i in keep}
        return Dataset(
            self.space,
            self.feature_names,
            tuple(r for r in self.records if r.input_id in keep),
            weights=weights,
            degenerate=frozenset(self.degenerate & keep),
        )

    def training_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cost regression rows: features followed by knob values, and costs."""
        rows = [r.features + self.space.values(r.setting) for r in self.records]
        X = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
        y = np.array([r.cost for r in self.records], dtype=np.float64)
        return X, y


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    test: Dataset
    ratio: float
    seed: int


# -- normalization ------------------------------------------------------------


def distance_bounds(ds: Dataset) -> Dict[str, Tuple[float, float]]:
    """(d_min, d_max) per input over the records present."""
    out = {}
    for i in ds.inputs:
        d = [r.distance for r in ds.records_for(i)]
        out[i] = (min(d), max(d))
    return out


def normalize_errors(ds: Dataset) -> Dataset:
    """Map each record's distance to ``(d - d_min) / (d_max - d_min)`` per input.

    The extremes are taken over the records present for that input, so a
    partial sweep normalizes against observed extremes only. Inputs whose
    distances are all equal are flagged degenerate and get error 0.
    """
    bounds = distance_bounds(ds)
    degenerate = set()
    records = []
    for r in ds.records:
        lo, hi = bounds[r.input_id]
        if hi == lo:
            degenerate.add(r.input_id)
            err = 0.0
        else:
            err = (r.distance - lo) / (hi - lo)
            err = min(1.0, max(0.0, err))
        records.append(replace(r, error=err))
    if degenerate:
        warnings.warn(
            f"degenerate inputs (constant distance), errors set to 0: {sorted(degenerate)}",
            DegenerateInputWarning,
            stacklevel=2,
        )
    return Dataset(ds.space, ds.feature_names, records, weights=ds.weights,
                   degenerate=frozenset(degenerate))


def reference_setting(ds: Dataset, input_id: str) -> KnobSetting:
    """The golden execution: minimum distance, lexicographically first on ties."""
    recs = ds.records_for(input_id)
    return min(recs, key=lambda r: (r.distance, r.setting)).setting


# -- splitting -----------------------------------------------------------------


def train_count(n_inputs: int, ratio: float) -> int:
    """Number of training inputs; rounds a fractional share up."""
    return int(math.ceil(ratio * n_inputs - 1e-9))


def split(ds: Dataset, ratio: float, seed: int) -> SplitDataset:
    """Partition by input: seeded shuffle, first ``train_count`` go to train."""
    inputs = list(ds.inputs)
    n = len(inputs)
    if n < 2:
        raise ValueError(f"need at least 2 inputs to split, have {n}")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"train ratio must lie in (0, 1), got {ratio}")
    n_train = train_count(n, ratio)
    if n_train <= 0 or n_train >= n:
        raise ValueError(f"ratio {ratio} leaves an empty side with {n} inputs")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    train_ids = [inputs[k] for k in order[:n_train]]
    test_ids = [inputs[k] for k in order[n_train:]]
    return SplitDataset(ds.subset(train_ids), ds.subset(test_ids), ratio, seed)


# -- pareto --------------------------------------------------------------------


def pareto_front(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Non-dominated (error, cost) points sorted by ascending error.

    A point is dominated by another with error and cost both no larger and
    at least one strictly smaller. Exact duplicates are kept once.
    """
    pts = sorted(set((float(e), float(c)) for e, c in points))
    front = []
    best_cost = math.inf
    for e, c in pts:
        if c < best_cost:
            front.append((e, c))
            best_cost = c
    return front


def per_input_pareto(ds: Dataset, input_id: str) -> List[Tuple[float, float]]:
    if input_id not in ds.inputs:
        raise KeyError(f"unknown input {input_id!r}")
    recs = ds.records_for(input_id)
    if any(r.error is None for r in recs):
        raise ValueError("dataset is not normalized")
    return pareto_front([(r.error, r.cost) for r in recs])


# -- profile file IO -----------------------------------------------------------


@dataclass(frozen=True)
class ProfileSchema:
    """Column names of a profile data file."""

    input_column: str = "input_id"
    feature_columns: Tuple[str, ...] = ()
    distance_column: str = "distance"
    cost_column: str = "cost"
    weight_column: Optional[str] = None

    def header(self, space: KnobSpace) -> List[str]:
        cols = [self.input_column, *self.feature_columns, *space.names,
                self.distance_column, self.cost_column]
        if self.weight_column:
            cols.append(self.weight_column)
        return cols


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_profile(ds: Dataset, schema: ProfileSchema) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(schema.header(ds.space))
    for i in ds.inputs:
        for r in ds.records_for(i):
            row = [r.input_id, *map(_fmt, r.features), *map(_fmt, ds.space.values(r.setting)),
                   _fmt(r.distance), _fmt(r.cost)]
            if schema.weight_column:
                row.append(_fmt(ds.weights[i] if ds.weights else 1.0))
            w.writerow(row)
    return buf.getvalue()


def write_profile(ds: Dataset, schema: ProfileSchema, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_profile(ds, schema))


def parse_profile(text: str, space: KnobSpace, schema: ProfileSchema, source="<profile>") -> Dataset:
    """Parse tab-delimited profile text. Rows must be complete and finite."""
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    try:
        header = next(reader)
    except StopIteration:
        raise ProfileError(f"{source}: empty profile file") from None
    expected = schema.header(space)
    missing = [c for c in expected if c not in header]
    if missing:
        raise ProfileError(f"{source}:1: missing columns {missing}")
    pos = {c: header.index(c) for c in expected}
    records = []
    weights: Dict[str, float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue

        def num(col):
            try:
                v = float(row[pos[col]])
            except (IndexError, ValueError):
                raise ProfileError(f"{source}:{lineno}: bad or missing value in column {col!r}") from None
            if not math.isfinite(v):
                raise ProfileError(f"{source}:{lineno}: non-finite value in column {col!r}")
            return v

        iid = row[pos[schema.input_column]].strip() if len(row) > pos[schema.input_column] else ""
        if not iid:
            raise ProfileError(f"{source}:{lineno}: missing input id")
        feats = tuple(num(c) for c in schema.feature_columns)
        try:
            setting = space.from_values([num(k) for k in space.names])
            rec = RunRecord(iid, feats, setting, num(schema.distance_column), num(schema.cost_column))
        except ProfileError:
            raise
        except ValueError as exc:
            raise ProfileError(f"{source}:{lineno}: {exc}") from None
        records.append(rec)
        if schema.weight_column:
            weights[iid] = num(schema.weight_column)
    try:
        return Dataset(space, schema.feature_columns, records,
                       weights=weights if schema.weight_column else None)
    except ValueError as exc:
        raise ProfileError(f"{source}: {exc}") from None


def read_profile(path, space: KnobSpace, schema: ProfileSchema) -> Dataset:
    with open(path, newline="") as fh:
        return parse_profile(fh.read(), space, schema, source=os.fspath(path))
