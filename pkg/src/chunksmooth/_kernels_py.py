"""Pure-Python (numpy) implementation of the hot kernels.

Mirrors ``_kernels.pyx`` operation for operation, but uses dense numpy
linear algebra for the subspace solves instead of a banded Cholesky.
"""

import numpy as np

JERK_STENCIL = np.array([-1.0, 3.0, -3.0, 1.0])

_SHIFT = 1e-12
# pivots below this fraction of the diagonal mean a rank-deficient subspace
_PIVOT_RTOL = 1e-11


def third_difference_matrix(n):
    """Dense ``(n - 3, n)`` matrix of the unscaled stencil ``(-1, 3, -3, 1)``."""
    d = np.zeros((max(n - 3, 0), n))
    for k in range(n - 3):
        d[k, k : k + 4] = JERK_STENCIL
    return d


def _solve_spd(h, rhs):
    try:
        c = np.linalg.cholesky(h)
        ok = bool(np.all(np.diag(c) ** 2 > _PIVOT_RTOL * np.diag(h)))
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        # only reachable when fewer than three coordinates are pinned
        h = h + _SHIFT * max(1.0, float(np.max(np.diag(h)))) * np.eye(len(h))
        c = np.linalg.cholesky(h)
    y = np.linalg.solve(c, rhs)
    return np.linalg.solve(c.T, y)


def jerk_box_qp(q, lower, upper, tol, max_iter):
    """Minimise ``0.5 * ||D (q + eps)||^2`` subject to ``lower <= eps <= upper``.

    Coordinates with ``lower == upper`` are eliminated and pinned to that
    value. Returns ``(eps, iterations, converged, kkt_residual)``.
    """
    q = np.asarray(q, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = q.shape[0]
    eps = np.where(lower == upper, lower, np.clip(0.0, lower, upper))
    free_idx = np.flatnonzero(lower != upper)
    if free_idx.size == 0 or n < 4:
        return eps, 0, True, 0.0

    d = third_difference_matrix(n)
    h_full = d.T @ d
    g_full = d.T @ (d @ q)
    h = h_full[np.ix_(free_idx, free_idx)]
    g = g_full + h_full[:, lower == upper] @ eps[lower == upper]
    g = g[free_idx]
    lo = lower[free_idx]
    hi = upper[free_idx]
    x = eps[free_idx].copy()
    m = x.size
    # 0 free, -1 at lower, +1 at upper
    status = np.zeros(m, dtype=np.int8)
    status[x == lo] = -1
    status[x == hi] = 1

    iterations = 0
    converged = False
    at_subspace_min = False
    # eps = 0 is feasible; keep it exactly when it already satisfies KKT
    if np.max(np.abs(x - np.clip(x - (h @ x + g), lo, hi))) <= tol:
        converged = True
    # multi-release until the first degenerate (zero-length) step, then classic
    single_release = False
    while not converged:
        grad = h @ x + g
        if at_subspace_min:
            lam = np.where(status == -1, grad, np.where(status == 1, -grad, np.inf))
            j = int(np.argmin(lam))
            if lam[j] >= -tol:
                converged = True
                break
            if single_release:
                status[j] = 0
            else:
                status[lam < -tol] = 0
            at_subspace_min = False
        if iterations >= max_iter:
            break
        iterations += 1
        free = np.flatnonzero(status == 0)
        if free.size == 0:
            at_subspace_min = True
            continue
        p = _solve_spd(h[np.ix_(free, free)], -grad[free])
        xf = x[free]
        if iterations == 1:
            # warm start: project the first Newton point onto the box
            x[free] = np.clip(xf + p, lo[free], hi[free])
            status[free] = np.where(x[free] == lo[free], -1, np.where(x[free] == hi[free], 1, 0))
            at_subspace_min = not np.any(status)
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(p > 0.0, (hi[free] - xf) / p, np.where(p < 0.0, (lo[free] - xf) / p, np.inf))
        block = int(np.argmin(ratio))
        alpha = float(ratio[block])
        if alpha >= 1.0:
            alpha = 1.0
            block = -1
        if alpha <= 0.0:
            alpha = 0.0
            single_release = True
        x[free] = xf + alpha * p
        if block >= 0:
            j = free[block]
            if p[block] > 0.0:
                x[j] = hi[j]
                status[j] = 1
            else:
                x[j] = lo[j]
                status[j] = -1
        else:
            at_subspace_min = True

    grad = h @ x + g
    kkt = float(np.max(np.abs(x - np.clip(x - grad, lo, hi))))
    eps[free_idx] = x
    return eps, iterations, converged and kkt <= tol, kkt


def eval_quintic(coef, seg, s, order=0):
    """Evaluate normalised quintic segments.

    ``coef`` has shape ``(n_segments, 6, n_joints)`` with the polynomial in
    normalised time ``s in [0, 1]``; returns the ``order``-th derivative with
    respect to ``s`` at each ``(seg[k], s[k])``.
    """
    c = coef[seg]
    s = np.asarray(s, dtype=float)[:, None]
    if order == 0:
        w = [1.0] * 6
        start = 0
    elif order == 1:
        w = [1.0, 2.0, 3.0, 4.0, 5.0]
        start = 1
    elif order == 2:
        w = [2.0, 6.0, 12.0, 20.0]
        start = 2
    elif order == 3:
        w = [6.0, 24.0, 60.0]
        start = 3
    else:
        raise ValueError("order must be 0..3")
    out = w[-1] * c[:, 5]
    for k in range(len(w) - 2, -1, -1):
        out = out * s + w[k] * c[:, start + k]
    return out
