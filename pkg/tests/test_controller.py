import io
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knobctl.core import Constraint, Knob, KnobSpace, RunRecord, accurate_setting, enumerate_settings
from knobctl.controller import (answer_requests, control_exhaustive, control_oracle,
                                control_precimonious, model_controller, oracle_controller,
                                write_jsonl)
from knobctl.dataset import Dataset, normalize_errors
from knobctl.models import MeasuredCostModel, train_fitness_table
from knobctl.synthbench import SurfaceSpec, generate_dataset

from conftest import FnCost, FnFitness, make_space


def brute_force(space, fit_fn, cost_fn, c):
    best = None
    for k in itertools.product(*[range(len(kn)) for kn in space.knobs]):
        if fit_fn(c.epsilon, k) >= c.pi - 1e-9:
            key = (cost_fn(k), k)
            if best is None or key < best:
                best = key
    return None if best is None else best[1]


ABCD = {(0,): (0.9, 10.0), (1,): (0.8, 4.0), (2,): (0.6, 2.0), (3,): (1.0, 12.0)}


@pytest.mark.parametrize("pi,expected", [(0.7, (1,)), (0.99, (3,)), (0.01, (2,))])
def test_four_setting_example(pi, expected):
    space = make_space(4)
    fit = FnFitness(space, lambda e, k: ABCD[k][0])
    cost = FnCost(space, lambda k: ABCD[k][1])
    d, stats = control_exhaustive(cost, fit, (), Constraint(0.1, pi), space)
    assert d.setting == expected
    assert d.predicted_cost == ABCD[expected][1] and d.predicted_fitness == ABCD[expected][0]
    assert stats.settings_evaluated == 4


def test_infeasible_gives_na():
    space = make_space(4)
    fit = FnFitness(space, lambda e, k: min(ABCD[k][0], 0.9))
    cost = FnCost(space, lambda k: ABCD[k][1])
    d, _ = control_exhaustive(cost, fit, (), Constraint(0.1, 0.99), space)
    assert not d.feasible and str(d) == "NA"


def test_ties_pick_lexicographically_smallest():
    space = make_space(3, 3)
    fit = FnFitness(space, lambda e, k: 1.0)
    cost = FnCost(space, lambda k: 5.0 if k != (0, 0) else 7.0)
    d, _ = control_exhaustive(cost, fit, (), Constraint(0.0, 1.0), space)
    assert d.setting == (0, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(1, 5), min_size=1, max_size=4))
def test_exhaustive_matches_brute_force(seed, shape):
    rng = np.random.default_rng(seed)
    space = make_space(*shape)
    ftab = {k: float(v) for k, v in zip(enumerate_settings(space), rng.choice([0.2, 0.5, 0.8, 1.0], space.size))}
    ctab = {k: float(v) for k, v in zip(enumerate_settings(space), rng.integers(1, 6, space.size))}
    fit = FnFitness(space, lambda e, k: ftab[k])
    cost = FnCost(space, lambda k: ctab[k])
    c = Constraint(0.1, float(rng.choice([0.2, 0.5, 0.8, 1.0])))
    d, _ = control_exhaustive(cost, fit, (), c, space)
    assert d.setting == brute_force(space, lambda e, k: ftab[k], lambda k: ctab[k], c)


def test_precimonious_monotone_surface_reaches_bottom():
    space = make_space(5, 4, 3)
    fit = FnFitness(space, lambda e, k: 1.0)
    cost = FnCost(space, lambda k: 1.0 + sum(space.values(k)))
    d, stats = control_precimonious(cost, fit, (), Constraint(0.0, 0.5), space)
    ex, ex_stats = control_exhaustive(cost, fit, (), Constraint(0.0, 0.5), space)
    assert d.setting == ex.setting == (0, 0, 0)
    assert stats.settings_evaluated < ex_stats.settings_evaluated


def test_precimonious_infeasible_start():
    space = make_space(3, 3)
    fit = FnFitness(space, lambda e, k: 0.5 if k == (2, 2) else 1.0)
    cost = FnCost(space, lambda k: 1.0)
    d, stats = control_precimonious(cost, fit, (), Constraint(0.0, 0.9), space)
    assert not d.feasible and stats.settings_evaluated == 1


def test_precimonious_ridge_local_minimum():
    # lowering knob 0 into level 7 costs a penalty, so the descent gets stuck
    space = make_space(10, 10)
    def cost_fn(k):
        return float(sum(space.values(k)) + (100.0 if k[0] == 7 else 0.0))
    fit = FnFitness(space, lambda e, k: 1.0)
    cost = FnCost(space, cost_fn)
    c = Constraint(0.0, 1.0)
    d, stats = control_precimonious(cost, fit, (), c, space)
    ex, ex_stats = control_exhaustive(cost, fit, (), c, space)
    assert d.setting == (8, 0)
    assert ex.setting == (0, 0)
    assert d.predicted_cost >= ex.predicted_cost
    assert stats.settings_evaluated < ex_stats.settings_evaluated


def test_precimonious_respects_feasibility_region():
    space = make_space(10, 10)
    # feasible only while one knob keeps level >= 5: an L-shaped region
    fit = FnFitness(space, lambda e, k: 1.0 if max(k) >= 5 else 0.0)
    cost = FnCost(space, lambda k: float(sum(space.values(k))))
    c = Constraint(0.0, 1.0)
    d, _ = control_precimonious(cost, fit, (), c, space)
    assert d.setting == (0, 5)
    assert d.setting == control_exhaustive(cost, fit, (), c, space)[0].setting


def test_lowering_toward_larger_values():
    space = KnobSpace((Knob("decim", (1, 2, 4, 8), 0), Knob("iters", (1, 2, 3), 2)))
    fit = FnFitness(space, lambda e, k: 1.0)
    # cheaper with more decimation and fewer iterations
    cost = FnCost(space, lambda k: 10.0 / space.values(k)[0] + space.values(k)[1])
    d, _ = control_precimonious(cost, fit, (), Constraint(0.0, 1.0), space)
    assert space.values(d.setting) == (8.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_feasible_region_nesting(seed):
    rng = np.random.default_rng(seed)
    space = make_space(4, 4)
    spec = SurfaceSpec.default(space, feature_dim=1, seed=int(rng.integers(1000)))
    ds = normalize_errors(generate_dataset(spec, 6))
    grid = [0.0, 0.1, 0.2, 0.4, 0.7, 1.0]
    t = train_fitness_table(ds, grid)
    cost = FnCost(space, lambda k: float(sum(space.values(k))))
    prev_cost = {}
    for pi in [1.0, 0.8, 0.5, 0.2]:
        last = None
        for e in grid:
            F = set(np.flatnonzero(t.fitness_all(e) >= pi - 1e-9))
            if last is not None:
                assert last <= F
            if (e,) in prev_cost:
                assert prev_cost[(e,)] <= F
            prev_cost[(e,)] = F
            last = F


@pytest.fixture(scope="module")
def oracle_data():
    space = make_space(6, 6)
    spec = SurfaceSpec.default(space, feature_dim=2, seed=13)
    return normalize_errors(generate_dataset(spec, 6))


def test_oracle_strict_corner_picks_accurate(oracle_data):
    i = oracle_data.inputs[0]
    d = control_oracle(oracle_data, i, Constraint(0.0, 1.0))
    assert d.setting == accurate_setting(oracle_data.space)


def test_oracle_cost_non_increasing_in_epsilon(oracle_data):
    for i in oracle_data.inputs:
        for pi in [1.0, 0.8, 0.5]:
            costs = [control_oracle(oracle_data, i, Constraint(e, pi)).predicted_cost
                     for e in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.0]]
            assert all(a >= b for a, b in zip(costs, costs[1:]))


def test_oracle_beats_model_controllers(oracle_data):
    grid = [0.0, 0.1, 0.2, 0.3, 0.5, 1.0]
    fit = train_fitness_table(oracle_data, grid)
    wrong_cost = FnCost(oracle_data.space, lambda k: float(-k[0] + 2 * k[1] + 20))
    ctl = model_controller(wrong_cost, fit, oracle_data.space)
    orc = oracle_controller(oracle_data)
    for i in oracle_data.inputs:
        for e in grid:
            for pi in [1.0, 0.6, 0.3]:
                c = Constraint(e, pi)
                d, o = ctl(i, oracle_data.features_of(i), c), orc(i, (), c)
                assert d.feasible == o.feasible
                if d.feasible:
                    assert o.predicted_cost <= oracle_data.lookup(i, d.setting).cost


def test_exact_cost_model_matches_oracle(oracle_data):
    fit = train_fitness_table(oracle_data, [0.0, 0.2, 0.5])
    cost = MeasuredCostModel(oracle_data)
    for i in oracle_data.inputs:
        c = Constraint(0.2, 0.6)
        d, _ = control_exhaustive(cost, fit, oracle_data.features_of(i), c, oracle_data.space)
        assert d.setting == control_oracle(oracle_data, i, c).setting


def test_oracle_per_input_mode(oracle_data):
    i = oracle_data.inputs[1]
    d = control_oracle(oracle_data, i, Constraint(0.3, 1.0), mode="per_input")
    assert oracle_data.lookup(i, d.setting).error <= 0.3
    cheaper = [r for r in oracle_data.records_for(i) if r.error <= 0.3 and r.cost < d.predicted_cost]
    assert not cheaper


def test_oracle_errors(oracle_data):
    with pytest.raises(KeyError):
        control_oracle(oracle_data, "missing", Constraint(0.1, 0.5))
    with pytest.raises(ValueError):
        control_oracle(oracle_data, oracle_data.inputs[0], Constraint(0.1, 0.5), mode="bogus")


def test_answer_requests_jsonl():
    space = make_space(4)
    fit = FnFitness(space, lambda e, k: min(ABCD[k][0], 0.9))
    cost = FnCost(space, lambda k: ABCD[k][1])
    lines = ['{"features": [], "epsilon": 0.1, "pi": 0.7, "input_id": "x"}', "",
             '{"features": [], "epsilon": 0.1, "pi": 0.99}']
    out = list(answer_requests(lines, cost, fit))
    assert out[0]["setting"] == {"k0": 2.0} and out[0]["input_id"] == "x" and out[0]["feasible"]
    assert out[1]["setting"] == "NA" and not out[1]["feasible"]
    buf = io.StringIO()
    write_jsonl(out, buf)
    assert [json.loads(l) for l in buf.getvalue().splitlines()] == out
    with pytest.raises(ValueError, match="line 1"):
        list(answer_requests(['{"epsilon": 0.1}'], cost, fit))
