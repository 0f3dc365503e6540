import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knobctl.core import RunRecord
from knobctl.dataset import (Dataset, DegenerateInputWarning, ProfileError, ProfileSchema,
                             format_profile, normalize_errors, parse_profile, pareto_front,
                             per_input_pareto, read_profile, reference_setting, split,
                             train_count, write_profile)
from knobctl.synthbench import SurfaceSpec, generate_dataset

from conftest import make_space


def _ds(space, rows, features=None):
    recs = [RunRecord(i, features.get(i, ()) if features else (), k, d, c) for i, k, d, c in rows]
    names = ("f0",) if features else ()
    return Dataset(space, names, recs)


def test_normalization_bounds_and_golden():
    space = make_space(3)
    ds = _ds(space, [("a", (0,), 4.0, 1.0), ("a", (1,), 2.0, 2.0), ("a", (2,), 1.0, 3.0)])
    n = normalize_errors(ds)
    errs = {r.setting: r.error for r in n.records}
    assert errs == {(0,): 1.0, (1,): 1.0 / 3.0, (2,): 0.0}
    assert reference_setting(ds, "a") == (2,)


def test_reference_ties_break_lexicographically():
    space = make_space(3)
    ds = _ds(space, [("a", (0,), 2.0, 1.0), ("a", (1,), 1.0, 2.0), ("a", (2,), 1.0, 3.0)])
    assert reference_setting(ds, "a") == (1,)


def test_degenerate_input_flagged():
    space = make_space(2)
    ds = _ds(space, [("a", (0,), 3.0, 1.0), ("a", (1,), 3.0, 2.0),
                     ("b", (0,), 1.0, 1.0), ("b", (1,), 0.0, 2.0)])
    with pytest.warns(DegenerateInputWarning):
        n = normalize_errors(ds)
    assert n.degenerate == frozenset({"a"})
    assert all(r.error == 0.0 for r in n.records_for("a"))


def test_partial_sweep_uses_observed_extremes():
    space = make_space(4)
    ds = _ds(space, [("a", (1,), 5.0, 1.0), ("a", (3,), 1.0, 2.0), ("a", (2,), 3.0, 1.5)])
    n = normalize_errors(ds)
    assert {r.setting: r.error for r in n.records} == {(1,): 1.0, (3,): 0.0, (2,): 0.5}


def _rescaled(ds, a, b):
    return Dataset(ds.space, ds.feature_names,
                   [RunRecord(r.input_id, r.features, r.setting, a * r.distance + b, r.cost)
                    for r in ds.records])


def test_affine_invariance_exact_on_dyadic_data():
    rng = np.random.default_rng(0)
    space = make_space(4, 3)
    rows = [(f"in{i}", k, float(rng.integers(0, 50)), 1.0)
            for i in range(5) for k in [(a, b) for a in range(4) for b in range(3)]]
    ds = _ds(space, rows)
    base = [r.error for r in normalize_errors(ds).records]
    for a, b in [(2.0, 0.0), (0.25, 3.0), (8.0, 7.0), (1024.0, 5.0)]:
        assert [r.error for r in normalize_errors(_rescaled(ds, a, b)).records] == base


@settings(max_examples=50, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(0, 1e3))
def test_affine_invariance_to_rounding(a, b):
    space = make_space(3, 3)
    rng = np.random.default_rng(1)
    rows = [(f"in{i}", (x, y), float(rng.random()) + 0.1 * i, 1.0)
            for i in range(4) for x in range(3) for y in range(3)]
    ds = _ds(space, rows)
    base = np.array([r.error for r in normalize_errors(ds).records])
    got = np.array([r.error for r in normalize_errors(_rescaled(ds, a, b)).records])
    assert np.max(np.abs(base - got)) <= 1e-9


@pytest.mark.parametrize("n,train", [(43, 33), (12, 9), (4, 3), (2, 2 - 1)])
def test_train_count(n, train):
    assert train_count(n, 0.75 if n != 2 else 0.5) == train


def _many_inputs(n):
    space = make_space(2)
    rows = [(f"x{i:02d}", (k,), float(k), 1.0 + k) for i in range(n) for k in range(2)]
    return _ds(space, rows)


def test_split_sizes_disjoint_and_deterministic():
    ds = _many_inputs(43)
    s = split(ds, 0.75, seed=7)
    assert len(s.train.inputs) == 33 and len(s.test.inputs) == 10
    assert not set(s.train.inputs) & set(s.test.inputs)
    assert set(s.train.inputs) | set(s.test.inputs) == set(ds.inputs)
    again = split(ds, 0.75, seed=7)
    assert again.train.inputs == s.train.inputs
    assert split(ds, 0.75, seed=8).train.inputs != s.train.inputs
    s12 = split(_many_inputs(12), 0.75, seed=0)
    assert (len(s12.train.inputs), len(s12.test.inputs)) == (9, 3)


def test_split_rejects_degenerate():
    with pytest.raises(ValueError):
        split(_many_inputs(1), 0.75, 0)
    with pytest.raises(ValueError):
        split(_many_inputs(4), 1.0, 0)


def test_pareto_front_example():
    pts = [(0.0, 10.0), (0.1, 8.0), (0.2, 9.0), (0.3, 5.0), (0.3, 6.0), (0.9, 5.0), (1.0, 1.0)]
    assert pareto_front(pts) == [(0.0, 10.0), (0.1, 8.0), (0.3, 5.0), (1.0, 1.0)]


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.1, 100)), min_size=1, max_size=40))
def test_pareto_front_is_nondominated_staircase(pts):
    front = pareto_front(pts)
    for e, c in front:
        assert not any((e2 <= e and c2 <= c and (e2 < e or c2 < c)) for e2, c2 in pts)
    for (e1, c1), (e2, c2) in zip(front, front[1:]):
        assert e1 < e2 and c1 > c2
    # every input point is dominated by or equal to some front point
    for e, c in pts:
        assert any(fe <= e and fc <= c for fe, fc in front)


def test_per_input_pareto_on_synthetic_lattice():
    space = make_space(6, 6)
    spec = SurfaceSpec.default(space, feature_dim=1, seed=2)
    ds = normalize_errors(generate_dataset(spec, 3))
    for i in ds.inputs:
        front = per_input_pareto(ds, i)
        assert front[0][0] == 0.0
        # along any single-knob chain toward accuracy, error falls and cost rises
        for r in ds.records_for(i):
            for j in range(2):
                k = list(r.setting)
                if k[j] + 1 < 6:
                    k[j] += 1
                    up = ds.lookup(i, tuple(k))
                    assert up.error <= r.error and up.cost >= r.cost
    with pytest.raises(KeyError):
        per_input_pareto(ds, "nope")


def test_duplicate_records_rejected():
    space = make_space(2)
    with pytest.raises(ValueError):
        _ds(space, [("a", (0,), 1.0, 1.0), ("a", (0,), 2.0, 1.0)])


def test_profile_round_trip(tmp_path):
    space = make_space(3, 2)
    spec = SurfaceSpec.default(space, feature_dim=2, seed=9)
    ds = generate_dataset(spec, 4)
    schema = ProfileSchema(feature_columns=("f0", "f1"))
    p = tmp_path / "profile.tsv"
    write_profile(ds, schema, p)
    back = read_profile(p, space, schema)
    assert format_profile(back, schema) == p.read_text()
    assert sorted(back.records, key=lambda r: (r.input_id, r.setting)) == \
        sorted(ds.records, key=lambda r: (r.input_id, r.setting))


def test_profile_errors_report_lines():
    space = make_space(2)
    schema = ProfileSchema()
    head = "input_id\tk0\tdistance\tcost\n"
    with pytest.raises(ProfileError, match=":3:"):
        parse_profile(head + "a\t1\t0.5\t2\na\t2\tnan\t1\n", space, schema)
    with pytest.raises(ProfileError, match=":2:"):
        parse_profile(head + "a\t9\t0.5\t2\n", space, schema)
    with pytest.raises(ProfileError, match=":2:"):
        parse_profile(head + "a\t1\t0.5\t0\n", space, schema)
    with pytest.raises(ProfileError, match="missing columns"):
        parse_profile("input_id\tk0\tcost\n", space, schema)
    with pytest.raises(ProfileError, match="empty"):
        parse_profile("", space, schema)
