"""Pure numpy implementations of the hot loops.

Every routine here mirrors ``_kernels.pyx`` operation for operation so the
two backends return bit-identical floats: sums run sequentially in the
same order, and no pairwise reductions are used where the compiled code
accumulates in a loop.
"""

import numpy as np


def best_split(X, y, min_leaf, tol):
    """Best (dim, threshold, sdr) by standard-deviation reduction.

    ``y`` must already be centred on its mean. Returns ``(-1, nan, 0.0)``
    when no admissible split exists. Candidates are scanned dim-major with
    ascending thresholds; a candidate replaces the incumbent only if it
    beats it by more than ``tol``, so near-ties go to the lowest dimension
    and then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = X.shape
    best_dim, best_thr, best_sdr = -1, float("nan"), 0.0
    if n < 2 * min_leaf or n < 2:
        return best_dim, best_thr, best_sdr

    tot_s = np.add.accumulate(y)[-1]
    tot_s2 = np.add.accumulate(y * y)[-1]
    mu = tot_s / n
    sd_root = np.sqrt(max(0.0, tot_s2 / n - mu * mu))

    counts_l = np.arange(1, n, dtype=np.float64)
    counts_r = n - counts_l
    idx = np.arange(1, n)
    valid_size = (idx >= min_leaf) & (n - idx >= min_leaf)

    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        s = np.add.accumulate(ys)[:-1]
        s2 = np.add.accumulate(ys * ys)[:-1]
        rs = tot_s - s
        rs2 = tot_s2 - s2
        ml = s / counts_l
        mr = rs / counts_r
        sd_l = np.sqrt(np.maximum(0.0, s2 / counts_l - ml * ml))
        sd_r = np.sqrt(np.maximum(0.0, rs2 / counts_r - mr * mr))
        sdr = sd_root - (counts_l / n) * sd_l - (counts_r / n) * sd_r
        ok = valid_size & (xs[1:] != xs[:-1])
        for i in np.flatnonzero(ok):
            if sdr[i] > best_sdr + tol:
                best_sdr = float(sdr[i])
                best_dim = j
                best_thr = float((xs[i] + xs[i + 1]) / 2.0)
    return best_dim, best_thr, best_sdr


def fitness_mass(errors, eps, weights, tol):
    """Probability mass of inputs whose error is within each bound.

    ``errors`` is (settings, inputs) with NaN for unprofiled cells, which
    contribute nothing. Returns (settings, len(eps)) masses divided by the
    total weight, both summed sequentially in input order.
    """
    errors = np.ascontiguousarray(errors, dtype=np.float64)
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    total = np.add.accumulate(weights)[-1] if weights.size else 0.0
    ns, ni = errors.shape
    out = np.zeros((ns, eps.size), dtype=np.float64)
    if ni == 0 or total <= 0:
        return out
    for e, bound in enumerate(eps):
        hit = errors <= bound + tol  # NaN compares False
        contrib = np.where(hit, weights[None, :], 0.0)
        out[:, e] = np.add.accumulate(contrib, axis=1)[:, -1] / total
    return out


def tree_predict(X, feature, threshold, left, right, parent, count, coef, intercept, smoothing):
    """Route rows of ``X`` through a flat tree and return smoothed predictions.

    Internal nodes have ``feature >= 0``; rows with ``x[feature] <= threshold``
    go left. Each node carries a linear model. With ``smoothing > 0`` the leaf
    value is blended with every ancestor's model on the way to the root.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        feat = feature[node]
        active = feat >= 0
        if not active.any():
            break
        a = rows[active]
        go_left = X[a, feat[active]] <= threshold[node[active]]
        node[a] = np.where(go_left, left[node[a]], right[node[a]])

    def model(nodes):
        v = intercept[nodes].copy()
        for j in range(d):
            v = v + coef[nodes, j] * X[:, j]
        return v

    pred = model(node)
    if smoothing > 0:
        cur = node.copy()
        while True:
            par = parent[cur]
            up = par >= 0
            if not up.any():
                break
            safe = np.where(up, par, 0)
            q = model(safe)
            n_below = count[cur].astype(np.float64)
            blended = (n_below * pred + smoothing * q) / (n_below + smoothing)
            pred = np.where(up, blended, pred)
            cur = np.where(up, par, cur)
    return pred


def feasible_argmin(fitness, cost, pi, tol):
    """First index minimizing ``cost`` among entries with fitness >= pi."""
    fitness = np.asarray(fitness, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    mask = fitness >= pi - tol
    if not mask.any():
        return -1
    masked = np.where(mask, cost, np.inf)
    best = int(np.argmin(masked))
    if not mask[best]:
        # every feasible cost is +inf
        return int(np.flatnonzero(mask)[0])
    return best
