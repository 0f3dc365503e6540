"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times end-to-end tree training and a full exhaustive control sweep
with each backend swapped in, and checks the outputs are bit-identical.
"""

import argparse
import statistics
import time

import numpy as np

from knobctl import kernels
from knobctl.models import tree as tree_mod


def _time(fn, repeat):
    out, samples = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool(np.all((a == b) | (np.isnan(a) & np.isnan(b))))


def cases(rng):
    X = rng.integers(0, 40, size=(20000, 4)).astype(float)
    y = rng.normal(size=20000)
    yc = y - y.mean()
    err = rng.random((1600, 33))
    eps = np.round(np.arange(0, 1.0001, 0.05), 12)
    w = np.ones(33)
    Xt = rng.random((3000, 3))
    yt = np.where(Xt[:, 0] > 0.5, 3 * Xt[:, 1], Xt[:, 2]) + 0.05 * rng.normal(size=3000)
    t = tree_mod.train_model_tree(Xt, yt)
    Q = rng.random((50000, 3))
    tree_args = (t.feature, t.threshold, t.left, t.right, t.parent, t.count, t.coef,
                 t.intercept, 15.0)
    fit = rng.random(10 ** 6)
    cost = rng.random(10 ** 6)
    return {
        "best_split (20000x4)": lambda k: k.best_split(X, yc, 4, 1e-12),
        "fitness_mass (1600x33x21)": lambda k: k.fitness_mass(err, eps, w, 1e-12),
        "tree_predict (50000 rows)": lambda k: k.tree_predict(Q, *tree_args),
        "feasible_argmin (1e6)": lambda k: k.feasible_argmin(fit, cost, 0.5, 1e-9),
        "train_model_tree (3000x3)": lambda k: _with_backend(k, lambda: tree_mod.train_model_tree(Xt, yt).predict(Xt)),
    }


def _with_backend(k, fn):
    saved = tree_mod.kernels.best_split, tree_mod.kernels.tree_predict
    tree_mod.kernels.best_split, tree_mod.kernels.tree_predict = k.best_split, k.tree_predict
    try:
        return fn()
    finally:
        tree_mod.kernels.best_split, tree_mod.kernels.tree_predict = saved


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    impls = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(impls)}")
    if "cython" not in impls:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n in impls) + f"{'speedup':>10s}  identical")
    for name, fn in cases(rng).items():
        times, outs = {}, {}
        for bname, k in impls.items():
            times[bname], outs[bname] = _time(lambda: fn(k), args.repeat)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        same = _same(outs.get("cython", outs["python"]), outs["python"])
        print(f"{name:32s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in impls)
              + f"{speed:9.1f}x  {same}")


if __name__ == "__main__":
    main()
