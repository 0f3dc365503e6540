"""Compiled and numpy kernels must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from knobctl import kernels
from knobctl.models.tree import train_model_tree, TreeParams

BACKENDS = kernels.backends()


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 40), d=st.integers(1, 3), min_leaf=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_best_split_backends_agree(n, d, min_leaf, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, d)).astype(float)
    y = rng.normal(size=n)
    y = y - y.mean()
    a = BACKENDS["cython"].best_split(X, y, min_leaf, 1e-12)
    b = BACKENDS["python"].best_split(X, y, min_leaf, 1e-12)
    assert a[0] == b[0]
    assert a[2] == b[2]
    assert (np.isnan(a[1]) and np.isnan(b[1])) or a[1] == b[1]


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@settings(max_examples=40, deadline=None)
@given(ns=st.integers(1, 30), ni=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_fitness_mass_backends_agree(ns, ni, seed):
    rng = np.random.default_rng(seed)
    err = rng.random((ns, ni))
    err[rng.random((ns, ni)) < 0.1] = np.nan
    eps = np.linspace(0, 1, 7)
    w = rng.random(ni) + 0.1
    a = BACKENDS["cython"].fitness_mass(err, eps, w, 1e-12)
    b = BACKENDS["python"].fitness_mass(err, eps, w, 1e-12)
    assert np.array_equal(a, b)


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@pytest.mark.parametrize("smoothing", [0.0, 15.0])
def test_tree_predict_backends_agree(smoothing):
    rng = np.random.default_rng(5)
    X = rng.random((300, 3))
    y = np.where(X[:, 0] > 0.5, 3 * X[:, 1], -2 * X[:, 2]) + 0.01 * rng.normal(size=300)
    t = train_model_tree(X, y, TreeParams(min_leaf=4, smoothing=smoothing))
    Q = rng.random((200, 3))
    args = (t.feature, t.threshold, t.left, t.right, t.parent, t.count, t.coef, t.intercept, smoothing)
    a = BACKENDS["cython"].tree_predict(Q, *args)
    b = BACKENDS["python"].tree_predict(Q, *args)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("backend", list(BACKENDS))
def test_feasible_argmin(backend):
    k = BACKENDS[backend]
    fit = np.array([0.9, 0.8, 0.6, 1.0])
    cost = np.array([10.0, 4.0, 2.0, 12.0])
    assert k.feasible_argmin(fit, cost, 0.7, 1e-9) == 1
    assert k.feasible_argmin(fit, cost, 0.99, 1e-9) == 3
    assert k.feasible_argmin(fit, cost, 1.01, 1e-9) == -1
    # ties go to the lowest index
    assert k.feasible_argmin(np.ones(3), np.array([2.0, 1.0, 1.0]), 0.5, 1e-9) == 1


@pytest.mark.parametrize("backend", list(BACKENDS))
def test_best_split_obvious_gap(backend):
    X = np.array([[1.0], [2.0], [3.0], [10.0], [11.0], [12.0]])
    y = np.array([1.0, 2.0, 3.0, 10.0, 11.0, 12.0])
    dim, thr, gain = BACKENDS[backend].best_split(X, y - y.mean(), 1, 0.0)
    assert dim == 0 and thr == 6.5
    assert gain == pytest.approx(3.7570, abs=1e-4)


def test_env_var_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, KNOBCTL_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", "from knobctl import kernels; print(kernels.BACKEND)"],
                       capture_output=True, text=True, env=env)
    assert r.stdout.strip() == "python"
