# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Jacobi sweep kernels.

Same algorithm and pair schedule as ``_kernels_py``: pairs are processed
sequentially in round-robin order; within a round the pairs are disjoint,
so the result matches the batched numpy fallback up to dot-product
rounding.
"""

from libc.math cimport fabs, sqrt, INFINITY

import numpy as np

from ._schedule import flat_pairs

cdef extern from *:
    """
    #include <stddef.h>

    /* restrict-qualified helpers so the compiler can vectorize; the rows
       handed to them never alias (pair indices are distinct). */
    static void spop_rot2(double* restrict x, double* restrict y,
                          double c, double s, ptrdiff_t n) {
        ptrdiff_t k;
        for (k = 0; k < n; ++k) {
            double a = x[k], b = y[k];
            x[k] = c * a - s * b;
            y[k] = s * a + c * b;
        }
    }

    #if defined(__GNUC__) && !defined(__clang__)
    __attribute__((optimize("tree-vectorize,fast-math")))
    #endif
    static double spop_dot2(const double* restrict x,
                            const double* restrict y, ptrdiff_t n) {
        double acc = 0.0;
        ptrdiff_t k;
        for (k = 0; k < n; ++k) acc += x[k] * y[k];
        return acc;
    }
    """
    void spop_rot2(double* x, double* y, double c, double s, Py_ssize_t n) nogil
    double spop_dot2(const double* x, const double* y, Py_ssize_t n) nogil


cdef int _orth_sweeps(double[:, ::1] vecs, double[:, ::1] acc, bint has_acc,
                      const long long[:, ::1] pairs, double[::1] sqn,
                      double tol, int max_sweeps) noexcept nogil:
    cdef Py_ssize_t n = vecs.shape[0]
    cdef Py_ssize_t m = vecs.shape[1]
    cdef Py_ssize_t npairs = pairs.shape[0]
    cdef Py_ssize_t sweep, idx, i, j
    cdef double app, aqq, apq, denom, ratio, worst, tau, t, c, s, tiny
    # cached square norms, updated analytically per rotation (de Rijk);
    # drift only affects rotation decisions, final norms are recomputed
    tiny = 0.0
    for i in range(n):
        sqn[i] = spop_dot2(&vecs[i, 0], &vecs[i, 0], m)
        if sqn[i] > tiny:
            tiny = sqn[i]
    # vectors below 1e-14 of the largest are rank-clamped to zero by the
    # caller anyway; rotating such rounding-noise clusters cycles without
    # converging, so freeze them (1e-28 on the squared norms)
    tiny = 1e-28 * tiny
    for sweep in range(max_sweeps):
        if sweep > 0:
            # refresh the cache: accumulated drift must not bias the
            # convergence ratios near the tolerance
            for i in range(n):
                sqn[i] = spop_dot2(&vecs[i, 0], &vecs[i, 0], m)
        worst = 0.0
        for idx in range(npairs):
            i = <Py_ssize_t> pairs[idx, 0]
            j = <Py_ssize_t> pairs[idx, 1]
            app = sqn[i]
            aqq = sqn[j]
            if app <= tiny or aqq <= tiny:
                continue
            apq = spop_dot2(&vecs[i, 0], &vecs[j, 0], m)
            denom = sqrt(app * aqq)
            if denom > 0.0:
                ratio = fabs(apq) / denom
            else:
                ratio = 0.0
            if ratio > worst:
                worst = ratio
            if ratio <= tol:
                continue
            tau = (aqq - app) / (2.0 * apq)
            if tau == 0.0:
                t = 1.0
            elif tau > 0.0:
                t = 1.0 / (tau + sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
            c = 1.0 / sqrt(1.0 + t * t)
            s = t * c
            spop_rot2(&vecs[i, 0], &vecs[j, 0], c, s, m)
            if has_acc:
                spop_rot2(&acc[i, 0], &acc[j, 0], c, s, n)
            # the shrinking side of the update cancels; refresh it exactly
            # so stale norms cannot fake convergence on dying columns
            x = app - t * apq
            y = aqq + t * apq
            if x < 0.1 * app:
                x = spop_dot2(&vecs[i, 0], &vecs[i, 0], m)
            if y < 0.1 * aqq:
                y = spop_dot2(&vecs[j, 0], &vecs[j, 0], m)
            sqn[i] = x if x > 0.0 else 0.0
            sqn[j] = y if y > 0.0 else 0.0
        if worst <= tol:
            return sweep + 1
    return -1


cdef int _eig_sweeps(double[:, ::1] a, const long long[:, ::1] pairs,
                     double tol, int max_sweeps) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t npairs = pairs.shape[0]
    cdef Py_ssize_t sweep, idx, p, q, k
    cdef double app, aqq, apq, denom, ratio, worst, tau, t, c, s, x, y, tiny
    # off-diagonals at the rounding floor of the matrix norm are
    # numerically zero; rotating them cycles without converging
    tiny = 0.0
    for p in range(n):
        tiny += spop_dot2(&a[p, 0], &a[p, 0], n)
    tiny = 1e-15 * sqrt(tiny)
    for sweep in range(max_sweeps):
        worst = 0.0
        for idx in range(npairs):
            p = <Py_ssize_t> pairs[idx, 0]
            q = <Py_ssize_t> pairs[idx, 1]
            app = a[p, p]
            aqq = a[q, q]
            apq = a[p, q]
            if fabs(apq) <= tiny:
                continue
            denom = sqrt(app * app + aqq * aqq)
            if denom > 0.0:
                ratio = fabs(apq) / denom
            else:
                ratio = INFINITY
            if ratio > worst:
                worst = ratio
            if ratio <= tol:
                continue
            tau = (aqq - app) / (2.0 * apq)
            if tau == 0.0:
                t = 1.0
            elif tau > 0.0:
                t = 1.0 / (tau + sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
            c = 1.0 / sqrt(1.0 + t * t)
            s = t * c
            spop_rot2(&a[p, 0], &a[q, 0], c, s, n)
            for k in range(n):
                x = a[k, p]
                y = a[k, q]
                a[k, p] = c * x - s * y
                a[k, q] = s * x + c * y
            a[p, q] = 0.0
            a[q, p] = 0.0
        if worst <= tol:
            return sweep + 1
    return -1


def svd_sweeps(double[:, ::1] vecs, acc, double tol, int max_sweeps):
    """Compiled twin of ``_kernels_py.svd_sweeps``."""
    cdef const long long[:, ::1] pairs = flat_pairs(vecs.shape[0])
    if pairs.shape[0] == 0:
        return 1
    cdef double[::1] sqn = np.empty(vecs.shape[0])
    cdef double[:, ::1] vv
    cdef int res
    if acc is None:
        vv = vecs  # placeholder, unused
        with nogil:
            res = _orth_sweeps(vecs, vv, 0, pairs, sqn, tol, max_sweeps)
    else:
        vv = acc
        with nogil:
            res = _orth_sweeps(vecs, vv, 1, pairs, sqn, tol, max_sweeps)
    return res


def eig_sweeps(double[:, ::1] a, double tol, int max_sweeps):
    """Compiled twin of ``_kernels_py.eig_sweeps``."""
    cdef const long long[:, ::1] pairs = flat_pairs(a.shape[0])
    if pairs.shape[0] == 0:
        return 1
    cdef int res
    with nogil:
        res = _eig_sweeps(a, pairs, tol, max_sweeps)
    return res
