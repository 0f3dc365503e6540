import itertools
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knobctl.core import RunRecord
from knobctl.dataset import Dataset, normalize_errors, split
from knobctl.models import (EXACT, FitnessTable, LinearCostModel, M5FitnessModel,
                            MeasuredCostModel, MissingProfileWarning, TreeParams,
                            evaluate_cost_accuracy, evaluate_fitness_accuracy, grid_index,
                            measured_fitness, rmse, train_cost_tree, train_fitness_m5,
                            train_fitness_table, train_linear_cost, train_linear_fitness)
from knobctl.models import serialize
from knobctl.synthbench import SurfaceSpec, generate_dataset

from conftest import make_space

GRID = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]


def _errors_ds(space, err):
    """err[input][setting] -> normalized dataset with error == given value."""
    recs = []
    for i, per in err.items():
        for k, e in per.items():
            recs.append(RunRecord(i, (), k, e, 1.0 + sum(k), error=e))
    return Dataset(space, (), recs)


def fraction_fitness(err, setting, eps):
    """Brute-force oracle: share of inputs whose error is within eps."""
    hits = sum(1 for per in err.values() if per.get(setting) is not None
               and Fraction(per[setting]) <= Fraction(eps))
    return Fraction(hits, len(err))


def test_three_of_four_inputs():
    space = make_space(2)
    err = {"a": {(0,): 0.4, (1,): 0.0}, "b": {(0,): 0.1, (1,): 0.0},
           "c": {(0,): 0.2, (1,): 0.0}, "d": {(0,): 0.25, (1,): 0.0}}
    t = train_fitness_table(_errors_ds(space, err), [0.0, 0.3])
    assert t.fitness(0.3, (0,)) == 0.75
    assert t.fitness(0.0, (0,)) == 0.0
    assert t.fitness(0.0, (1,)) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 9))
def test_table_matches_fraction_oracle(seed, n_inputs):
    rng = np.random.default_rng(seed)
    space = make_space(3, 2)
    settings_ = list(itertools.product(range(3), range(2)))
    err = {f"i{j}": {k: float(rng.choice([0.0, 0.1, 0.2, 0.3, 0.45, 0.7, 1.0])) for k in settings_}
           for j in range(n_inputs)}
    t = train_fitness_table(_errors_ds(space, err), GRID)
    for k in settings_:
        for e in GRID:
            assert t.fitness(e, k) == float(fraction_fitness(err, k, e))


def test_boundary_is_inclusive_and_grid_floors():
    space = make_space(1)
    err = {"a": {(0,): 0.3}, "b": {(0,): 0.7}}
    t = train_fitness_table(_errors_ds(space, err), [0.0, 0.3, 0.7])
    assert t.fitness(0.3, (0,)) == 0.5
    assert t.fitness(0.69, (0,)) == 0.5  # floors to the 0.3 column
    assert t.fitness(0.7, (0,)) == 1.0
    assert grid_index(np.array([0.1, 0.2]), 0.05) == -1
    t2 = train_fitness_table(_errors_ds(space, err), [0.3, 0.7])
    assert t2.fitness(0.0, (0,)) == 0.0


def test_weighted_inputs():
    space = make_space(1)
    recs = [RunRecord("a", (), (0,), 0.1, 1.0, error=0.1), RunRecord("b", (), (0,), 0.9, 1.0, error=0.9)]
    ds = Dataset(space, (), recs, weights={"a": 3.0, "b": 1.0})
    assert train_fitness_table(ds, [0.5]).fitness(0.5, (0,)) == 0.75


def test_missing_profile_warns_and_adds_no_mass():
    space = make_space(2)
    err = {"a": {(0,): 0.0, (1,): 0.0}, "b": {(1,): 0.0}}
    with pytest.warns(MissingProfileWarning):
        t = train_fitness_table(_errors_ds(space, err), [0.0])
    assert t.fitness(0.0, (0,)) == 0.5


def test_table_requires_normalized():
    space = make_space(1)
    ds = Dataset(space, (), [RunRecord("a", (), (0,), 1.0, 1.0)])
    with pytest.raises(ValueError):
        train_fitness_table(ds, GRID)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_fitness_monotone_in_epsilon(seed):
    rng = np.random.default_rng(seed)
    space = make_space(4, 3)
    settings_ = list(itertools.product(range(4), range(3)))
    err = {f"i{j}": {k: float(rng.random()) for k in settings_} for j in range(6)}
    ds = _errors_ds(space, err)
    t = train_fitness_table(ds, GRID)
    assert np.all(np.diff(t.table, axis=1) >= 0)
    m5 = train_fitness_m5(ds, GRID)
    assert np.all(np.diff(m5.grid_values, axis=1) >= 0)
    assert m5.grid_values.min() >= 0 and m5.grid_values.max() <= 1


@pytest.fixture(scope="module")
def synth_split():
    space = make_space(10, 10)
    spec = SurfaceSpec.default(space, feature_dim=2, seed=5)
    ds = normalize_errors(generate_dataset(spec, 20))
    return split(ds, 0.75, seed=1)


def test_m5_exact_reproduces_table(synth_split):
    t = train_fitness_table(synth_split.train, GRID)
    m5 = train_fitness_m5(synth_split.train, GRID, EXACT)
    assert np.max(np.abs(m5.grid_values - t.table)) <= 1e-6


def test_m5_default_close_to_table(synth_split):
    t = train_fitness_table(synth_split.train, GRID)
    m5 = train_fitness_m5(synth_split.train, GRID)
    assert float(np.mean(np.abs(m5.grid_values - t.table))) <= 0.1


def test_fitness_accuracy_report(synth_split):
    t = train_fitness_table(synth_split.train, GRID)
    acc = evaluate_fitness_accuracy(t, synth_split.test, GRID)
    assert len(acc.points) == 100 * len(GRID) and acc.skipped == 0
    assert 0.0 <= acc.under_prediction_fraction <= 1.0
    # table on its own training data is exact
    self_acc = evaluate_fitness_accuracy(t, synth_split.train, GRID)
    assert self_acc.mean_abs_deviation == 0.0


def test_measured_fitness_shape(synth_split):
    m = measured_fitness(synth_split.test, [0.0, 0.5])
    assert m.shape == (100, 2)
    assert np.all(m[synth_split.test.space.ordinal((9, 9))] == 1.0)


def test_linear_cost_recovers_plane():
    space = make_space(5, 4)
    recs = []
    for i, f in enumerate([1.0, 2.0, 3.5]):
        for k in itertools.product(range(5), range(4)):
            v = space.values(k)
            recs.append(RunRecord(f"x{i}", (f,), k, 1.0, 2.0 + 3.0 * f + 0.5 * v[0] + 1.25 * v[1]))
    ds = Dataset(space, ("f",), recs)
    m = train_linear_cost(ds)
    assert m.intercept == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(m.coef, [3.0, 0.5, 1.25], atol=1e-9)


def test_tree_beats_linear_on_piecewise_cost():
    space = make_space(10, 10)
    ratios, worst = [], 0.0
    for seed in range(20):
        spec = SurfaceSpec.default(space, feature_dim=2, seed=seed)
        s = split(normalize_errors(generate_dataset(spec, 20)), 0.75, seed=1)
        tree = train_cost_tree(s.train)
        t = rmse(tree, s.test)
        ratios.append(rmse(train_linear_cost(s.train), s.test) / t)
        worst = max(worst, t)
        assert len(evaluate_cost_accuracy(tree, s.test)) == len(s.test.records)
    # held-out inputs can straddle the regime boundary, so judge the typical case
    assert np.median(ratios) >= 1.3
    assert worst < 5.0


def test_measured_cost_model(synth_split):
    m = MeasuredCostModel(synth_split.test)
    i = synth_split.test.inputs[0]
    f = synth_split.test.features_of(i)
    assert m.predict(f, (3, 4)) == synth_split.test.lookup(i, (3, 4)).cost


@pytest.mark.parametrize("kind", ["cost_tree", "cost_linear", "fitness_table", "fitness_m5", "fitness_linear"])
def test_model_serialization_round_trip(synth_split, kind, tmp_path):
    tr = synth_split.train
    model = {"cost_tree": lambda: train_cost_tree(tr), "cost_linear": lambda: train_linear_cost(tr),
             "fitness_table": lambda: train_fitness_table(tr, GRID),
             "fitness_m5": lambda: train_fitness_m5(tr, GRID),
             "fitness_linear": lambda: train_linear_fitness(tr, GRID)}[kind]()
    p = tmp_path / "m.json"
    serialize.save(model, p)
    back = serialize.load(p)
    assert type(back) is type(model)
    if kind.startswith("cost"):
        f = tr.features_of(tr.inputs[0])
        assert np.array_equal(back.predict_all(f), model.predict_all(f))
    else:
        for e in GRID:
            assert np.array_equal(back.fitness_all(e), model.fitness_all(e))


def test_serialization_rejects_foreign_payload():
    with pytest.raises(serialize.ModelFormatError):
        serialize.loads('{"format": "other"}')
    with pytest.raises(serialize.ModelFormatError):
        serialize.loads('{"format": "knobctl-model", "version": 99}')
