"""Reference implementations used only to check the package.

Each oracle is written independently of the code under test: dense linear
algebra, exhaustive enumeration, symbolic algebra or finite differences.
"""

from __future__ import annotations

import itertools

import numpy as np


def dense_third_difference(n: int) -> np.ndarray:
    D = np.zeros((n - 3, n))
    for i in range(n - 3):
        D[i, i : i + 4] = (-1.0, 3.0, -3.0, 1.0)
    return D


def enumerate_box_qp(q, lower, upper):
    """Global minimiser of 0.5*||D (q + e)||^2 over the box, by face enumeration.

    Each non-fixed coordinate is either at its lower bound, at its upper
    bound, or free. On every face the free coordinates take the face's
    unconstrained minimiser; the best feasible candidate over all faces is the
    global optimum of a convex QP. Fixed coordinates (lower == upper) are
    substituted. Requires the free subproblem to be positive definite, which
    holds whenever at least three consecutive coordinates are fixed.
    """
    q = np.asarray(q, float)
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    n = len(q)
    D = dense_third_difference(n)
    H = D.T @ D
    g = H @ q
    var = np.flatnonzero(lower != upper)
    base = np.where(lower == upper, lower, 0.0)
    best, best_obj = None, np.inf
    for mask in itertools.product((False, True), repeat=len(var)):
        mask = np.array(mask, dtype=bool)
        free, clamped = var[mask], var[~mask]
        sides = np.array(list(itertools.product((False, True), repeat=len(clamped))), dtype=bool).reshape(2 ** len(clamped), len(clamped))
        E = np.tile(base, (len(sides), 1))
        E[:, clamped] = np.where(sides, upper[clamped], lower[clamped])
        if len(free):
            rest = np.setdiff1d(np.arange(n), free)
            rhs = -(g[free][:, None] + H[np.ix_(free, rest)] @ E[:, rest].T)
            E[:, free] = np.linalg.solve(H[np.ix_(free, free)], rhs).T
            ok = np.all((E[:, free] >= lower[free] - 1e-13) & (E[:, free] <= upper[free] + 1e-13), axis=1)
            E = E[ok]
            if not len(E):
                continue
        R = (q + E) @ D.T
        obj = 0.5 * np.sum(R * R, axis=1)
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best, best_obj = E[k].copy(), float(obj[k])
    return best, best_obj


def quintic_hermite_sympy(p0, v0, a0, p1, v1, a1, h):
    """Quintic through the six endpoint conditions, solved symbolically."""
    import sympy as sp

    t = sp.symbols("t")
    c = sp.symbols("c0:6")
    poly = sum(ci * t**i for i, ci in enumerate(c))
    eqs = [
        poly.subs(t, 0) - p0,
        sp.diff(poly, t).subs(t, 0) - v0,
        sp.diff(poly, t, 2).subs(t, 0) - a0,
        poly.subs(t, h) - p1,
        sp.diff(poly, t).subs(t, h) - v1,
        sp.diff(poly, t, 2).subs(t, h) - a1,
    ]
    sol = sp.solve(eqs, c, dict=True)[0]
    return t, sp.expand(poly.subs(sol))


def fk_planar(lengths, q):
    ang = np.cumsum(q)
    return np.array([np.sum(np.asarray(lengths) * np.cos(ang)), np.sum(np.asarray(lengths) * np.sin(ang)), 0.0])


def finite_difference_jacobian(f, q, h=1e-6):
    q = np.asarray(q, float)
    cols = []
    for i in range(len(q)):
        dq = np.zeros_like(q)
        dq[i] = h
        cols.append((f(q + dq) - f(q - dq)) / (2 * h))
    return np.stack(cols, axis=1)
