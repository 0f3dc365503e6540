"""Constraint-grid tables (speedup, inversion) and report files."""

from __future__ import annotations

import csv
import io
import os
import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .controller import Controller
from .core import Constraint, ControlDecision, accurate_setting
from .dataset import Dataset

NA = "NA"


@dataclass(frozen=True)
class ConstraintGrid:
    """Epsilon columns ascending, pi rows descending."""

    epsilons: Tuple[float, ...]
    pis: Tuple[float, ...]

    def __post_init__(self):
        eps = tuple(sorted(float(e) for e in self.epsilons))
        pis = tuple(sorted((float(p) for p in self.pis), reverse=True))
        if not eps or not pis:
            raise ValueError("constraint grid needs at least one epsilon and one pi")
        if any(not 0.0 <= e <= 1.0 for e in eps):
            raise ValueError("epsilons must lie in [0, 1]")
        if any(not 0.0 < p <= 1.0 for p in pis):
            raise ValueError("pis must lie in (0, 1]")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "pis", pis)

    @classmethod
    def from_config(cls, ebs: Sequence[float], pbs: Sequence[float]) -> "ConstraintGrid":
        """Evaluation grid from config grids, with epsilon 0 always included."""
        eps = set(round(float(e), 12) for e in ebs)
        eps.add(0.0)
        return cls(tuple(eps), tuple(pbs))

    def cells(self):
        for r, pi in enumerate(self.pis):
            for c, eps in enumerate(self.epsilons):
                yield r, c, Constraint(eps, pi)


Cell = Union[float, str, None]


@dataclass
class ConstraintTable:
    """Rows indexed by pi (descending), columns by epsilon (ascending).

    Cells hold a number, ``"T"``/``"F"`` or None for NA.
    """

    grid: ConstraintGrid
    cells: List[List[Cell]]
    kind: str = "speedup"

    def __getitem__(self, key):
        pi, eps = key
        return self.cells[self.grid.pis.index(pi)][self.grid.epsilons.index(eps)]

    def to_tsv(self, digits: int = 3) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["pi\\eps", *(_fmt(e, 12) for e in self.grid.epsilons)])
        for pi, row in zip(self.grid.pis, self.cells):
            w.writerow([_fmt(pi, 12), *(_cell(v, digits) for v in row)])
        return buf.getvalue()

    def na_mask(self) -> np.ndarray:
        return np.array([[v is None for v in row] for row in self.cells])


def _fmt(x: float, digits: int) -> str:
    return f"{round(float(x), digits):g}" if digits < 12 else repr(round(float(x), digits))


def _cell(v: Cell, digits: int) -> str:
    if v is None:
        return NA
    if isinstance(v, str):
        return v
    return f"{v:.{digits}f}"


# -- speedup -------------------------------------------------------------------


class MissingMeasurementWarning(UserWarning):
    pass


def speedup(test: Dataset, decision: ControlDecision, input_id: str) -> Optional[float]:
    """Measured accurate-setting cost over measured chosen-setting cost.

    None when the decision is infeasible or a measurement is missing.
    """
    if not decision.feasible:
        return None
    ref = test.lookup(input_id, accurate_setting(test.space))
    got = test.lookup(input_id, decision.setting)
    if ref is None or got is None:
        warnings.warn(f"no measurement to compute speedup for input {input_id!r} "
                      f"at {decision.setting}", MissingMeasurementWarning, stacklevel=2)
        return None
    return ref.cost / got.cost


def run_grid(test: Dataset, controller: Controller, grid: ConstraintGrid) -> Dict[Tuple[int, int], Dict[str, ControlDecision]]:
    """Decisions for every cell and test input."""
    out = {}
    for r, c, con in grid.cells():
        out[(r, c)] = {i: controller(i, test.features_of(i), con) for i in test.inputs}
    return out


def speedup_table(test: Dataset, controller: Controller, grid: ConstraintGrid,
                  decisions=None) -> ConstraintTable:
    """Mean speedup over test inputs with a feasible decision, per cell."""
    decisions = decisions if decisions is not None else run_grid(test, controller, grid)
    cells = [[None] * len(grid.epsilons) for _ in grid.pis]
    for (r, c), per_input in decisions.items():
        vals = [s for i, d in per_input.items() if (s := speedup(test, d, i)) is not None]
        cells[r][c] = float(np.mean(vals)) if vals else None
    return ConstraintTable(grid, cells, "speedup")


def inversion_table(test: Dataset, controller: Controller, oracle: Controller, grid: ConstraintGrid,
                    decisions=None, oracle_decisions=None, aggregate: str = "any") -> ConstraintTable:
    """Compare a controller's settings with the oracle's per cell.

    ``aggregate="any"`` marks a cell ``T`` when any test input's setting
    differs from the oracle's (including one side being infeasible), ``F``
    when all match, and NA when both sides are infeasible for every input.
    ``aggregate="fraction"`` stores the share of mismatching inputs instead.
    """
    decisions = decisions if decisions is not None else run_grid(test, controller, grid)
    oracle_decisions = oracle_decisions if oracle_decisions is not None else run_grid(test, oracle, grid)
    cells = [[None] * len(grid.epsilons) for _ in grid.pis]
    for (r, c), per_input in decisions.items():
        ref = oracle_decisions[(r, c)]
        both_na = all(not per_input[i].feasible and not ref[i].feasible for i in per_input)
        if both_na:
            continue
        mismatches = sum(per_input[i].setting != ref[i].setting for i in per_input)
        if aggregate == "any":
            cells[r][c] = "T" if mismatches else "F"
        elif aggregate == "fraction":
            cells[r][c] = mismatches / len(per_input)
        else:
            raise ValueError(f"unknown aggregate {aggregate!r}")
    return ConstraintTable(grid, cells, "inversion")


def oracle_cost_gap(test: Dataset, decisions, oracle_decisions) -> Optional[float]:
    """Mean relative measured-cost excess over the oracle where both are feasible."""
    gaps = []
    for key, per_input in decisions.items():
        for i, d in per_input.items():
            o = oracle_decisions[key][i]
            if d.feasible and o.feasible:
                got = test.lookup(i, d.setting)
                best = test.lookup(i, o.setting)
                if got is not None and best is not None:
                    gaps.append(got.cost / best.cost - 1.0)
    return float(np.mean(gaps)) if gaps else None


# -- report files ----------------------------------------------------------------


def _write(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def emit_reports(out_dir, speedups: ConstraintTable, inversions: ConstraintTable,
                 cost_pairs: Sequence[Tuple[float, float]],
                 fitness_points: Sequence[Tuple[Sequence[float], float, float, float]],
                 pareto: Mapping[str, Sequence[Tuple[float, float]]],
                 knob_names: Sequence[str] = ()) -> List[str]:
    """Write speedups.tsv, inversions.tsv, cost_scatter.tsv,
    fitness_scatter.tsv and one pareto_<input>.tsv per input.

    ``fitness_points`` rows are (knob values, epsilon, predicted, measured).
    Returns the paths written.
    """
    if not os.path.isdir(out_dir):
        raise NotADirectoryError(f"output directory {out_dir!r} does not exist")
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir!r} is not writable")
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    with open(path("speedups.tsv"), "w") as fh:
        fh.write(speedups.to_tsv())
    with open(path("inversions.tsv"), "w") as fh:
        fh.write(inversions.to_tsv())
    _write(path("cost_scatter.tsv"), ["predicted", "measured"],
           ([repr(float(p)), repr(float(m))] for p, m in cost_pairs))
    names = list(knob_names)
    _write(path("fitness_scatter.tsv"), [*names, "epsilon", "predicted", "measured"],
           ([*map(repr, map(float, vals)), repr(float(e)), repr(float(p)), repr(float(m))]
            for vals, e, p, m in fitness_points))
    for input_id, pts in sorted(pareto.items()):
        _write(path(f"pareto_{_safe(input_id)}.tsv"), ["error", "cost"],
               ([repr(float(e)), repr(float(c))] for e, c in pts))
    return written


def read_table(path) -> Tuple[List[float], List[float], List[List[str]]]:
    """Parse a written table back into (pis, epsilons, raw cell strings)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    eps = [float(x) for x in rows[0][1:]]
    pis = [float(r[0]) for r in rows[1:]]
    return pis, eps, [r[1:] for r in rows[1:]]
