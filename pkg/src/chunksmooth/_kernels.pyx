# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: banded active-set box-QP for the jerk objective and
quintic segment evaluation. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double _W[4]
_W[0] = -1.0
_W[1] = 3.0
_W[2] = -3.0
_W[3] = 1.0

cdef double _SHIFT = 1e-12
# pivots below this fraction of the diagonal mean a rank-deficient subspace
cdef double _PIVOT_RTOL = 1e-11


cdef void _gram_band(Py_ssize_t n, double[:, ::1] hb):
    # hb[i, m] = (D^T D)[i, i + m], m = 0..3
    cdef Py_ssize_t i, m, k
    cdef double acc
    for i in range(n):
        for m in range(4):
            acc = 0.0
            if i + m < n:
                for k in range(i + m - 3 if i + m >= 3 else 0, i + 1):
                    if k + 3 < n:
                        acc += _W[i - k] * _W[i + m - k]
            hb[i, m] = acc


cdef inline double _hget(double[:, ::1] hb, Py_ssize_t i, Py_ssize_t j):
    if j < i:
        i, j = j, i
    if j - i > 3:
        return 0.0
    return hb[i, j - i]


cdef int _chol_band(Py_ssize_t m, double[:, ::1] a, double shift, bint check):
    # in-place lower banded Cholesky; a[r, k] holds L[r, r - k], k = 0..3
    # check: reject pivots that are tiny relative to the diagonal (rank-deficient subspace)
    cdef Py_ssize_t r, k, j, lo, t
    cdef double s, diag
    for r in range(m):
        diag = a[r, 0] + shift
        for k in range(3, -1, -1):
            if k > r:
                continue
            j = r - k
            s = a[r, k]
            if k == 0:
                s += shift
            lo = r - 3 if r >= 3 else 0
            if j - 3 > lo:
                lo = j - 3
            for t in range(lo, j):
                s -= a[r, r - t] * a[j, j - t]
            if k == 0:
                if s <= 0.0 or (check and s <= _PIVOT_RTOL * diag):
                    return -1
                a[r, 0] = s ** 0.5
            else:
                a[r, k] = s / a[j, 0]
    return 0


cdef void _chol_solve(Py_ssize_t m, double[:, ::1] a, double[::1] b):
    cdef Py_ssize_t r, t, lo, hi
    cdef double s
    for r in range(m):
        s = b[r]
        lo = r - 3 if r >= 3 else 0
        for t in range(lo, r):
            s -= a[r, r - t] * b[t]
        b[r] = s / a[r, 0]
    for r in range(m - 1, -1, -1):
        s = b[r]
        hi = r + 4 if r + 4 < m else m
        for t in range(r + 1, hi):
            s -= a[t, t - r] * b[t]
        b[r] = s / a[r, 0]


def jerk_box_qp(q, lower, upper, double tol, Py_ssize_t max_iter):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(upper, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    eps_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] eps = eps_arr
    cdef Py_ssize_t i, j, k, r, c, nfree = 0, nf, block, iterations = 0
    cdef double v, alpha, pk, ratio, lam, best, kkt, g

    for i in range(n):
        if lv[i] == uv[i]:
            eps[i] = lv[i]
        else:
            v = 0.0
            if v < lv[i]:
                v = lv[i]
            if v > uv[i]:
                v = uv[i]
            eps[i] = v
            nfree += 1
    if nfree == 0 or n < 4:
        return eps_arr, 0, True, 0.0

    hb_arr = np.zeros((n, 4), dtype=np.float64)
    cdef double[:, ::1] hb = hb_arr
    _gram_band(n, hb)

    # full gradient excluding the eps terms: D^T D q
    cdef double[::1] g0 = np.zeros(n, dtype=np.float64)
    for i in range(n):
        v = 0.0
        for j in range(i - 3 if i >= 3 else 0, i + 4 if i + 4 < n else n):
            v += _hget(hb, i, j) * qv[j]
        g0[i] = v

    cdef Py_ssize_t[::1] fidx = np.empty(nfree, dtype=np.intp)
    cdef signed char[::1] status = np.zeros(nfree, dtype=np.int8)
    c = 0
    for i in range(n):
        if lv[i] != uv[i]:
            fidx[c] = i
            if eps[i] == lv[i]:
                status[c] = -1
            elif eps[i] == uv[i]:
                status[c] = 1
            c += 1

    cdef double[::1] grad = np.empty(nfree, dtype=np.float64)
    cdef double[::1] p = np.empty(nfree, dtype=np.float64)
    cdef Py_ssize_t[::1] work = np.empty(nfree, dtype=np.intp)
    cdef double[:, ::1] band = np.zeros((nfree, 4), dtype=np.float64)
    cdef bint converged = False, at_min = False
    # multi-release until the first degenerate (zero-length) step, then classic
    cdef bint single_release = False
    cdef bint first = True

    while True:
        # gradient over free coordinates: H (q + eps)
        for c in range(nfree):
            i = fidx[c]
            v = g0[i]
            for j in range(i - 3 if i >= 3 else 0, i + 4 if i + 4 < n else n):
                v += _hget(hb, i, j) * eps[j]
            grad[c] = v
        if first:
            # eps = 0 is feasible; keep it exactly when it already satisfies KKT
            first = False
            kkt = 0.0
            for c in range(nfree):
                i = fidx[c]
                v = eps[i] - grad[c]
                if v < lv[i]:
                    v = lv[i]
                elif v > uv[i]:
                    v = uv[i]
                v = fabs(eps[i] - v)
                if v > kkt:
                    kkt = v
            if kkt <= tol:
                converged = True
                break
        if at_min:
            best = 0.0
            block = -1
            for c in range(nfree):
                if status[c] == -1:
                    lam = grad[c]
                elif status[c] == 1:
                    lam = -grad[c]
                else:
                    continue
                if block < 0 or lam < best:
                    best = lam
                    block = c
            if block < 0 or best >= -tol:
                converged = True
                break
            if single_release:
                status[block] = 0
            else:
                for c in range(nfree):
                    if status[c] == -1 and grad[c] < -tol:
                        status[c] = 0
                    elif status[c] == 1 and -grad[c] < -tol:
                        status[c] = 0
            at_min = False
        if iterations >= max_iter:
            break
        iterations += 1
        nf = 0
        for c in range(nfree):
            if status[c] == 0:
                work[nf] = c
                nf += 1
        if nf == 0:
            at_min = True
            continue
        for r in range(nf):
            i = fidx[work[r]]
            for k in range(4):
                if k <= r:
                    band[r, k] = _hget(hb, i, fidx[work[r - k]])
                else:
                    band[r, k] = 0.0
            p[r] = -grad[work[r]]
        if _chol_band(nf, band, 0.0, True) != 0:
            v = hb[0, 0]
            for i in range(n):
                if hb[i, 0] > v:
                    v = hb[i, 0]
            if v < 1.0:
                v = 1.0
            for r in range(nf):
                i = fidx[work[r]]
                for k in range(4):
                    if k <= r:
                        band[r, k] = _hget(hb, i, fidx[work[r - k]])
                    else:
                        band[r, k] = 0.0
            _chol_band(nf, band, _SHIFT * v, False)
        _chol_solve(nf, band, p)
        if iterations == 1:
            # warm start: project the first Newton point onto the box
            block = 0
            for r in range(nf):
                c = work[r]
                i = fidx[c]
                v = eps[i] + p[r]
                if v <= lv[i]:
                    eps[i] = lv[i]
                    status[c] = -1
                    block = 1
                elif v >= uv[i]:
                    eps[i] = uv[i]
                    status[c] = 1
                    block = 1
                else:
                    eps[i] = v
            at_min = block == 0
            continue
        alpha = 1.0
        block = -1
        for r in range(nf):
            c = work[r]
            i = fidx[c]
            pk = p[r]
            if pk > 0.0:
                ratio = (uv[i] - eps[i]) / pk
            elif pk < 0.0:
                ratio = (lv[i] - eps[i]) / pk
            else:
                continue
            if ratio < alpha:
                alpha = ratio
                block = r
        if alpha <= 0.0:
            alpha = 0.0
            single_release = True
        for r in range(nf):
            i = fidx[work[r]]
            eps[i] = eps[i] + alpha * p[r]
        if block >= 0:
            c = work[block]
            i = fidx[c]
            if p[block] > 0.0:
                eps[i] = uv[i]
                status[c] = 1
            else:
                eps[i] = lv[i]
                status[c] = -1
        else:
            at_min = True

    kkt = 0.0
    for c in range(nfree):
        i = fidx[c]
        g = g0[i]
        for j in range(i - 3 if i >= 3 else 0, i + 4 if i + 4 < n else n):
            g += _hget(hb, i, j) * eps[j]
        v = eps[i] - g
        if v < lv[i]:
            v = lv[i]
        if v > uv[i]:
            v = uv[i]
        v = fabs(eps[i] - v)
        if v > kkt:
            kkt = v
    return eps_arr, iterations, bool(converged and kkt <= tol), kkt


def eval_quintic(coef, seg, s, int order=0):
    cdef double[:, :, ::1] cv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t[::1] sv = np.ascontiguousarray(seg, dtype=np.intp)
    cdef double[::1] tv = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t m = sv.shape[0], nj = cv.shape[2], k, j, a
    cdef double w[6]
    cdef int start
    if order == 0:
        w[:] = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        start = 0
    elif order == 1:
        w[:5] = [1.0, 2.0, 3.0, 4.0, 5.0]
        start = 1
    elif order == 2:
        w[:4] = [2.0, 6.0, 12.0, 20.0]
        start = 2
    elif order == 3:
        w[:3] = [6.0, 24.0, 60.0]
        start = 3
    else:
        raise ValueError("order must be 0..3")
    cdef int nw = 6 - start
    out_arr = np.empty((m, nj), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double acc, t
    for k in range(m):
        t = tv[k]
        for j in range(nj):
            acc = w[nw - 1] * cv[sv[k], 5, j]
            for a in range(nw - 2, -1, -1):
                acc = acc * t + w[a] * cv[sv[k], start + a, j]
            out[k, j] = acc
    return out_arr
