# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

NAME = "cython"


cdef extern from *:
    """
    static inline int pgsr_popcount(unsigned long long v) { return __builtin_popcountll(v); }
    """
    int pgsr_popcount(unsigned long long v) nogil


cdef double _block_kkt(double[::1, :] X, double[::1] r, double[::1] beta,
                       Py_ssize_t s, Py_ssize_t e, double thr, double[::1] work) nogil:
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc, nb = 0.0, out = 0.0, gn = 0.0, d
    for j in range(s, e):
        nb += beta[j] * beta[j]
    nb = sqrt(nb)
    for j in range(s, e):
        acc = 0.0
        for i in range(m):
            acc += X[i, j] * r[i]
        work[j - s] = acc
    if nb > 0.0:
        for j in range(s, e):
            d = work[j - s] - thr * beta[j] / nb
            out += d * d
        return sqrt(out)
    for j in range(s, e):
        gn += work[j - s] * work[j - s]
    gn = sqrt(gn) - thr
    return gn if gn > 0.0 else 0.0


def bcd_solve(double[::1, :] X, double[::1] y, int64_t[::1] starts,
              double[::1] weights, double[::1] gram, int64_t[::1] gram_off,
              double[::1] lips, unsigned char[::1] ortho, double lam, double tol,
              Py_ssize_t max_sweeps, bint fit_intercept, beta_in, double intercept,
              Py_ssize_t inner_max):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t nblocks = starts.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] beta_arr = np.array(beta_in, dtype=np.float64, copy=True)
    cdef double[::1] beta = beta_arr
    cdef double[::1] r = np.empty(m)
    cdef Py_ssize_t maxp = 1
    cdef Py_ssize_t l, s, e, pl, i, j, k, it, sweep, sweeps = 0
    for l in range(nblocks):
        if starts[l + 1] - starts[l] > maxp:
            maxp = starts[l + 1] - starts[l]
    cdef double[::1] g = np.empty(maxp)
    cdef double[::1] old = np.empty(maxp)
    cdef double[::1] b = np.empty(maxp)
    cdef double[::1] u = np.empty(maxp)
    cdef double[::1] work = np.empty(maxp)
    trace_list = []
    cdef double inner_tol = tol * 1e-2
    cdef double acc, thr, gn, t, un, shrink, diff, change, max_change, db, pen, nrm, kkt = INFINITY
    cdef double val, c0
    cdef bint converged = False
    cdef const double* A

    with nogil:
        for i in range(m):
            acc = y[i] - intercept
            r[i] = acc
        for j in range(p):
            if beta[j] != 0.0:
                for i in range(m):
                    r[i] -= X[i, j] * beta[j]

    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        with nogil:
            max_change = 0.0
            for l in range(nblocks):
                s = starts[l]
                e = starts[l + 1]
                pl = e - s
                A = &gram[gram_off[l]]
                for j in range(pl):
                    old[j] = beta[s + j]
                # g = X_l^T r + A old
                for j in range(pl):
                    acc = 0.0
                    for i in range(m):
                        acc += X[i, s + j] * r[i]
                    val = 0.0
                    for k in range(pl):
                        val += A[j * pl + k] * old[k]
                    g[j] = acc + val
                thr = lam * weights[l]
                gn = 0.0
                for j in range(pl):
                    gn += g[j] * g[j]
                gn = sqrt(gn)
                if gn <= thr:
                    for j in range(pl):
                        b[j] = 0.0
                elif ortho[l]:
                    c0 = A[0]
                    for j in range(pl):
                        b[j] = (1.0 - thr / gn) * g[j] / c0
                else:
                    t = 1.0 / lips[l]
                    for j in range(pl):
                        b[j] = old[j]
                    for it in range(inner_max):
                        un = 0.0
                        for j in range(pl):
                            val = 0.0
                            for k in range(pl):
                                val += A[j * pl + k] * b[k]
                            u[j] = b[j] - t * (val - g[j])
                            un += u[j] * u[j]
                        un = sqrt(un)
                        shrink = 1.0 - t * thr / un if un > 0.0 else 0.0
                        diff = 0.0
                        for j in range(pl):
                            val = u[j] * shrink if shrink > 0.0 else 0.0
                            if fabs(val - b[j]) > diff:
                                diff = fabs(val - b[j])
                            b[j] = val
                        if diff <= inner_tol:
                            break
                change = 0.0
                for j in range(pl):
                    val = b[j] - old[j]
                    if fabs(val) > change:
                        change = fabs(val)
                    work[j] = val
                if change > 0.0:
                    for j in range(pl):
                        if work[j] != 0.0:
                            for i in range(m):
                                r[i] -= X[i, s + j] * work[j]
                        beta[s + j] = b[j]
                    if change > max_change:
                        max_change = change
            if fit_intercept:
                acc = 0.0
                for i in range(m):
                    acc += r[i]
                db = acc / m
                intercept += db
                for i in range(m):
                    r[i] -= db
                if fabs(db) > max_change:
                    max_change = fabs(db)
            pen = 0.0
            for l in range(nblocks):
                nrm = 0.0
                for j in range(starts[l], starts[l + 1]):
                    nrm += beta[j] * beta[j]
                pen += weights[l] * sqrt(nrm)
            acc = 0.0
            for i in range(m):
                acc += r[i] * r[i]
            val = 0.5 * acc + lam * pen
        trace_list.append(val)
        if max_change < tol:
            kkt = _full_kkt(X, r, beta, starts, weights, lam, fit_intercept, work)
            if kkt < tol:
                converged = True
                break
    if not converged:
        kkt = _full_kkt(X, r, beta, starts, weights, lam, fit_intercept, work)
    return beta_arr, intercept, sweeps, converged, kkt, np.asarray(trace_list, dtype=np.float64)


cdef double _full_kkt(double[::1, :] X, double[::1] r, double[::1] beta,
                      int64_t[::1] starts, double[::1] weights, double lam,
                      bint fit_intercept, double[::1] work) nogil:
    cdef Py_ssize_t l, i
    cdef double kkt = 0.0, v, acc
    for l in range(starts.shape[0] - 1):
        v = _block_kkt(X, r, beta, starts[l], starts[l + 1], lam * weights[l], work)
        if v > kkt:
            kkt = v
    if fit_intercept:
        acc = 0.0
        for i in range(r.shape[0]):
            acc += r[i]
        if fabs(acc) > kkt:
            kkt = fabs(acc)
    return kkt


def minimize_parity_poly(masks, coefs, int nbits):
    cdef uint64_t[::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef double[::1] cf = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef Py_ssize_t nterms = mk.shape[0]
    cdef uint64_t total = (<uint64_t>1) << nbits
    cdef uint64_t full = total - 1
    cdef uint64_t k, neg, best_k = 0
    cdef Py_ssize_t t
    cdef double val, best_v = INFINITY
    with nogil:
        for k in range(total):
            neg = (~k) & full
            val = 0.0
            for t in range(nterms):
                if pgsr_popcount(neg & mk[t]) & 1:
                    val += cf[t] * -1.0
                else:
                    val += cf[t] * 1.0
            if val < best_v:
                best_v = val
                best_k = k
    return int(best_k), float(best_v)
