"""Pure-Python/numpy versions of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation and are used when the
compiled extension is unavailable or ``PGSRHB_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

NAME = "python"


def _block_kkt(Xl, r, beta_l, thr):
    grad = Xl.T @ r
    nb = math.sqrt(float(beta_l @ beta_l))
    if nb > 0.0:
        return float(np.linalg.norm(grad - thr * beta_l / nb))
    return max(0.0, float(np.linalg.norm(grad)) - thr)


def bcd_solve(X, y, starts, weights, gram, gram_off, lips, ortho, lam, tol,
              max_sweeps, fit_intercept, beta, intercept, inner_max):
    """Cyclic block coordinate descent for the group lasso.

    Minimizes ``0.5 * ||y - b - X beta||^2 + lam * sum_l w_l ||beta_l||`` with
    blocks ``beta[starts[l]:starts[l+1]]``.  ``gram`` holds the flattened
    within-block Gram matrices and ``lips`` their largest eigenvalues.
    """
    beta = np.array(beta, dtype=np.float64, copy=True)
    nblocks = len(starts) - 1
    r = y - intercept - X @ beta
    inner_tol = tol * 1e-2
    trace = []
    converged = False
    kkt = math.inf
    sweeps = 0
    grams = []
    for l in range(nblocks):
        p = starts[l + 1] - starts[l]
        grams.append(gram[gram_off[l]:gram_off[l] + p * p].reshape(p, p))

    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_change = 0.0
        for l in range(nblocks):
            s, e = starts[l], starts[l + 1]
            Xl = X[:, s:e]
            A = grams[l]
            old = beta[s:e].copy()
            g = Xl.T @ r + A @ old
            thr = lam * weights[l]
            gn = math.sqrt(float(g @ g))
            if gn <= thr:
                new = np.zeros_like(old)
            elif ortho[l]:
                new = (1.0 - thr / gn) * g / A[0, 0]
            else:
                t = 1.0 / lips[l]
                b = old.copy()
                for _ in range(inner_max):
                    u = b - t * (A @ b - g)
                    un = math.sqrt(float(u @ u))
                    shrink = 1.0 - t * thr / un if un > 0.0 else 0.0
                    nb = u * shrink if shrink > 0.0 else np.zeros_like(u)
                    diff = float(np.max(np.abs(nb - b)))
                    b = nb
                    if diff <= inner_tol:
                        break
                new = b
            delta = new - old
            change = float(np.max(np.abs(delta))) if delta.size else 0.0
            if change > 0.0:
                r -= Xl @ delta
                beta[s:e] = new
                max_change = max(max_change, change)
        if fit_intercept:
            db = float(r.sum()) / len(r)
            intercept += db
            r -= db
            max_change = max(max_change, abs(db))
        pen = 0.0
        for l in range(nblocks):
            bl = beta[starts[l]:starts[l + 1]]
            pen += weights[l] * math.sqrt(float(bl @ bl))
        trace.append(0.5 * float(r @ r) + lam * pen)
        if max_change < tol:
            kkt = 0.0
            for l in range(nblocks):
                s, e = starts[l], starts[l + 1]
                kkt = max(kkt, _block_kkt(X[:, s:e], r, beta[s:e], lam * weights[l]))
            if fit_intercept:
                kkt = max(kkt, abs(float(r.sum())))
            if kkt < tol:
                converged = True
                break
    if not converged:
        kkt = 0.0
        for l in range(nblocks):
            s, e = starts[l], starts[l + 1]
            kkt = max(kkt, _block_kkt(X[:, s:e], r, beta[s:e], lam * weights[l]))
        if fit_intercept:
            kkt = max(kkt, abs(float(r.sum())))
    return beta, intercept, sweeps, converged, kkt, np.asarray(trace)


def minimize_parity_poly(masks, coefs, nbits):
    """Lexicographically first minimizer of ``sum_t coefs[t] * chi_t(k)``.

    Assignment ``k`` sets variable ``pos`` to +1 when bit ``nbits-1-pos`` of
    ``k`` is set; ``chi_t`` is ``-1`` to the number of masked variables at -1.
    Returns ``(k, value)``.
    """
    masks = np.asarray(masks, dtype=np.uint64)
    coefs = np.asarray(coefs, dtype=np.float64)
    total = 1 << nbits
    full = np.uint64(total - 1)
    chunk = 1 << 16
    best_k, best_v = 0, math.inf
    for start in range(0, total, chunk):
        ks = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        neg = ~ks & full
        vals = np.zeros(len(ks))
        for m, c in zip(masks, coefs):
            odd = np.bitwise_count(neg & m) & 1
            vals += c * (1.0 - 2.0 * odd)
        i = int(np.argmin(vals))
        if vals[i] < best_v:
            best_k, best_v = start + i, float(vals[i])
    return best_k, best_v
