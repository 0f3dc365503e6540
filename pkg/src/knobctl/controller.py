"""Knob-setting selection under an (epsilon, pi) constraint."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, Optional, Sequence, TextIO, Tuple

import numpy as np

from . import kernels
from .core import (FEASIBILITY_TOL, Constraint, ControlDecision, KnobSetting, KnobSpace,
                   accurate_setting)
from .dataset import Dataset
from .models.base import CostModel, FitnessModel
from .models.fitness import measured_fitness


@dataclass
class SearchStats:
    settings_evaluated: int = 0
    fitness_queries: int = 0
    cost_queries: int = 0


def is_feasible(fitness: float, pi: float) -> bool:
    return fitness >= pi - FEASIBILITY_TOL


def control_exhaustive(cost: CostModel, fit: FitnessModel, features: Sequence[float],
                       c: Constraint, space: KnobSpace) -> Tuple[ControlDecision, SearchStats]:
    """Sweep the whole space; cheapest feasible setting, lowest index on ties."""
    fitness = np.asarray(fit.fitness_all(c.epsilon), dtype=np.float64)
    stats = SearchStats(settings_evaluated=space.size, fitness_queries=space.size)
    feasible = fitness >= c.pi - FEASIBILITY_TOL
    stats.cost_queries = int(feasible.sum())
    if not feasible.any():
        return ControlDecision.infeasible(), stats
    costs = np.asarray(cost.predict_all(features), dtype=np.float64)
    best = kernels.feasible_argmin(fitness, costs, c.pi, FEASIBILITY_TOL)
    return (ControlDecision(space.setting_at(best), float(costs[best]), float(fitness[best])),
            stats)


def _groups(items: Sequence[int], g: int):
    return [list(chunk) for chunk in np.array_split(np.asarray(items, dtype=int), g) if len(chunk)]


def control_precimonious(cost: CostModel, fit: FitnessModel, features: Sequence[float],
                         c: Constraint, space: KnobSpace) -> Tuple[ControlDecision, SearchStats]:
    """Delta-debugging descent from the accurate setting.

    Knobs that can still lose quality are split into ``g`` contiguous groups
    (``g`` starts at 1). Each group in turn proposes lowering all its knobs
    by one quality step; a proposal is taken when it stays feasible and does
    not raise predicted cost, after which granularity resets to 1. When a
    full pass accepts nothing, ``g`` doubles; the search ends once a pass at
    single-knob granularity fails. The result is a local minimum.
    """
    stats = SearchStats()
    fit_cache: Dict[KnobSetting, float] = {}
    cost_cache: Dict[KnobSetting, float] = {}

    def fitness_of(k):
        if k not in fit_cache:
            stats.fitness_queries += 1
            fit_cache[k] = float(fit.fitness(c.epsilon, k))
        return fit_cache[k]

    def cost_of(k):
        if k not in cost_cache:
            stats.cost_queries += 1
            cost_cache[k] = float(cost.predict(features, k))
        return cost_cache[k]

    current = accurate_setting(space)
    if not is_feasible(fitness_of(current), c.pi):
        stats.settings_evaluated = len(fit_cache)
        return ControlDecision.infeasible(), stats
    current_cost = cost_of(current)
    g = 1
    while True:
        movable = [j for j, knob in enumerate(space.knobs) if knob.lower(current[j]) is not None]
        if not movable:
            break
        g = min(g, len(movable))
        accepted = False
        for group in _groups(movable, g):
            proposal = list(current)
            for j in group:
                proposal[j] = space.knobs[j].lower(current[j])
            proposal = tuple(proposal)
            if not is_feasible(fitness_of(proposal), c.pi):
                continue
            pc = cost_of(proposal)
            if pc <= current_cost:
                current, current_cost = proposal, pc
                accepted = True
                break
        if accepted:
            g = 1
            continue
        if g >= len(movable):
            break
        g = min(2 * g, len(movable))
    stats.settings_evaluated = len(fit_cache)
    return ControlDecision(current, current_cost, fitness_of(current)), stats


SEARCHES = {"exhaustive": control_exhaustive, "precimonious": control_precimonious}


def control_oracle(test: Dataset, input_id: str, c: Constraint, mode: str = "fitness",
                   _fitness_cache: Optional[dict] = None) -> ControlDecision:
    """Best measured-cost setting for ``input_id`` using measured errors.

    ``mode="fitness"`` requires the exact fitness over all inputs of
    ``test`` to reach ``pi``. ``mode="per_input"`` instead bounds this
    input's own error by epsilon (the per-input formulation). Settings never
    run on ``input_id`` cannot be costed and are skipped.
    """
    if input_id not in test.inputs:
        raise KeyError(f"unknown input {input_id!r}")
    col = test.inputs.index(input_id)
    costs = test.cost_matrix[:, col]
    if mode == "fitness":
        if _fitness_cache is not None and c.epsilon in _fitness_cache:
            fitness = _fitness_cache[c.epsilon]
        else:
            fitness = measured_fitness(test, [c.epsilon])[:, 0]
            if _fitness_cache is not None:
                _fitness_cache[c.epsilon] = fitness
    elif mode == "per_input":
        err = test.error_matrix[:, col]
        fitness = np.where(err <= c.epsilon + 1e-12, 1.0, 0.0)
    else:
        raise ValueError(f"unknown oracle mode {mode!r}")
    usable = np.where(np.isnan(costs), -1.0, fitness)
    best = kernels.feasible_argmin(usable, np.nan_to_num(costs, nan=np.inf), c.pi, FEASIBILITY_TOL)
    if best < 0:
        return ControlDecision.infeasible()
    return ControlDecision(test.space.setting_at(best), float(costs[best]), float(fitness[best]))


# -- controller callables ------------------------------------------------------

Controller = Callable[[str, Tuple[float, ...], Constraint], ControlDecision]


def model_controller(cost: CostModel, fit: FitnessModel, space: KnobSpace,
                     search: str = "exhaustive") -> Controller:
    fn = SEARCHES[search]

    def control(input_id, features, c):
        return fn(cost, fit, features, c, space)[0]

    return control


def oracle_controller(test: Dataset, mode: str = "fitness") -> Controller:
    cache: dict = {}

    def control(input_id, features, c):
        return control_oracle(test, input_id, c, mode, _fitness_cache=cache)

    return control


# -- request / response records ------------------------------------------------


def decision_record(decision: ControlDecision, space: KnobSpace, stats: Optional[SearchStats] = None,
                    **request) -> dict:
    out = dict(request)
    out["feasible"] = decision.feasible
    if decision.feasible:
        out["setting"] = dict(zip(space.names, space.values(decision.setting)))
        out["predicted_cost"] = decision.predicted_cost
        out["predicted_fitness"] = decision.predicted_fitness
    else:
        out["setting"] = "NA"
        out["predicted_cost"] = None
        out["predicted_fitness"] = None
    if stats is not None:
        out["stats"] = {"settings_evaluated": stats.settings_evaluated,
                        "fitness_queries": stats.fitness_queries,
                        "cost_queries": stats.cost_queries}
    return out


def answer_requests(lines: Iterable[str], cost: CostModel, fit: FitnessModel,
                    search: str = "exhaustive") -> Iterator[dict]:
    """Answer JSON-lines requests ``{"features": [...], "epsilon": e, "pi": p}``.

    Any extra request keys (such as ``input_id``) are echoed back.
    """
    fn = SEARCHES[search]
    space = fit.space
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            c = Constraint(float(req["epsilon"]), float(req["pi"]))
            feats = tuple(float(f) for f in req.get("features", ()))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"request line {n}: {exc}") from None
        decision, stats = fn(cost, fit, feats, c, space)
        yield decision_record(decision, space, stats, **req)


def write_jsonl(records: Iterable[dict], fh: TextIO) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
