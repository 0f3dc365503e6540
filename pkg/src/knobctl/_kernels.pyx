# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics match ``_kernels_py`` exactly."""

import numpy as np

from libc.math cimport sqrt, NAN


def best_split(X, y, Py_ssize_t min_leaf, double tol):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1]
    cdef Py_ssize_t i, j, k
    cdef int best_dim = -1
    cdef double best_thr = NAN, best_sdr = 0.0
    cdef double tot_s = 0.0, tot_s2 = 0.0, mu, sd_root
    cdef double s, s2, rs, rs2, nl, nr, ml, mr, vl, vr, sdr, xa, xb
    cdef long[::1] order
    cdef double[::1] xs = np.empty(n, dtype=np.float64)
    cdef double[::1] ys = np.empty(n, dtype=np.float64)

    if n < 2 * min_leaf or n < 2:
        return best_dim, best_thr, best_sdr
    for i in range(n):
        tot_s = tot_s + yv[i]
    for i in range(n):
        tot_s2 = tot_s2 + yv[i] * yv[i]
    mu = tot_s / n
    vl = tot_s2 / n - mu * mu
    sd_root = sqrt(vl if vl > 0.0 else 0.0)

    for j in range(d):
        order = np.argsort(np.asarray(Xv[:, j]), kind="stable").astype(np.int_)
        for i in range(n):
            k = order[i]
            xs[i] = Xv[k, j]
            ys[i] = yv[k]
        s = 0.0
        s2 = 0.0
        for i in range(n - 1):
            s = s + ys[i]
            s2 = s2 + ys[i] * ys[i]
            k = i + 1  # points on the left
            if k < min_leaf or n - k < min_leaf:
                continue
            xa = xs[i]
            xb = xs[i + 1]
            if xa == xb:
                continue
            nl = <double>k
            nr = <double>(n - k)
            rs = tot_s - s
            rs2 = tot_s2 - s2
            ml = s / nl
            mr = rs / nr
            vl = s2 / nl - ml * ml
            vr = rs2 / nr - mr * mr
            sdr = sd_root - (nl / n) * sqrt(vl if vl > 0.0 else 0.0) - (nr / n) * sqrt(vr if vr > 0.0 else 0.0)
            if sdr > best_sdr + tol:
                best_sdr = sdr
                best_dim = <int>j
                best_thr = (xa + xb) / 2.0
    return best_dim, best_thr, best_sdr


def fitness_mass(errors, eps, weights, double tol):
    cdef const double[:, ::1] ev = np.ascontiguousarray(errors, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t ns = ev.shape[0], ni = ev.shape[1], ne = bv.shape[0]
    cdef Py_ssize_t s, e, i
    cdef double total = 0.0, acc, bound, x
    out_arr = np.zeros((ns, ne), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(wv.shape[0]):
        total = total + wv[i]
    if ni == 0 or total <= 0:
        return out_arr
    for s in range(ns):
        for e in range(ne):
            bound = bv[e] + tol
            acc = 0.0
            for i in range(ni):
                x = ev[s, i]
                if x <= bound:  # NaN compares False
                    acc = acc + wv[i]
                else:
                    acc = acc + 0.0
            out[s, e] = acc / total
    return out_arr


def tree_predict(X, feature, threshold, left, right, parent, count, coef, intercept, double smoothing):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long[::1] feat = np.ascontiguousarray(feature, dtype=np.int_)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const long[::1] lt = np.ascontiguousarray(left, dtype=np.int_)
    cdef const long[::1] rt = np.ascontiguousarray(right, dtype=np.int_)
    cdef const long[::1] par = np.ascontiguousarray(parent, dtype=np.int_)
    cdef const long[::1] cnt = np.ascontiguousarray(count, dtype=np.int_)
    cdef const double[:, ::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(intercept, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1]
    cdef Py_ssize_t r, j
    cdef long node, up
    cdef double p, q, nb
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for r in range(n):
        node = 0
        while feat[node] >= 0:
            if Xv[r, feat[node]] <= thr[node]:
                node = lt[node]
            else:
                node = rt[node]
        p = b[node]
        for j in range(d):
            p = p + cf[node, j] * Xv[r, j]
        if smoothing > 0:
            while par[node] >= 0:
                up = par[node]
                q = b[up]
                for j in range(d):
                    q = q + cf[up, j] * Xv[r, j]
                nb = <double>cnt[node]
                p = (nb * p + smoothing * q) / (nb + smoothing)
                node = up
        out[r] = p
    return out_arr


def feasible_argmin(fitness, cost, double pi, double tol):
    cdef const double[::1] fv = np.ascontiguousarray(fitness, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t i, best = -1
    cdef double bound = pi - tol
    for i in range(fv.shape[0]):
        if fv[i] >= bound:
            if best < 0 or cv[i] < cv[best]:
                best = i
    return best
