"""Minimum-jerk perturbation of a blended reference under per-regime box bounds.

Each joint is an independent box-constrained QP::

    minimise    sum_i ((D (q_ref + eps))_i)^2 * dt
    subject to  lower <= eps <= upper

with ``D`` the third difference ``(-1, 3, -3, 1) / dt**3`` over interior rows.
Delay-window samples have ``lower == upper == 0`` and are eliminated from the
decision vector before solving.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels_py import JERK_STENCIL, third_difference_matrix
from .blending import ReferenceTrajectory, Regime
from .core import BoundsConfig

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class JerkOperator:
    """Third-difference operator mapping ``n_samples`` values to ``n_samples - 3`` jerks."""

    n_samples: int
    dt: float

    def __post_init__(self):
        if self.n_samples < 4:
            raise ValueError(f"sequence of {self.n_samples} samples is too short for jerk objective")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n_samples:
            raise ValueError(f"expected {self.n_samples} samples, got {x.shape[0]}")
        return (x[3:] - 3.0 * x[2:-1] + 3.0 * x[1:-2] - x[:-3]) / self.dt**3

    def matrix(self) -> np.ndarray:
        return third_difference_matrix(self.n_samples) / self.dt**3


def jerk_energy(samples, dt: float) -> float:
    """Rectangle-rule jerk energy ``sum ||D x||^2 * dt`` summed over joints."""
    x = np.asarray(samples, dtype=float)
    if x.shape[0] < 4:
        raise ValueError(f"sequence of {x.shape[0]} samples is too short for jerk objective")
    j = JerkOperator(x.shape[0], dt).apply(x)
    return float(np.sum(j * j) * dt)


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Single-joint problem; ``lower``/``upper`` bound the perturbation."""

    q_ref: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    dt: float

    def __post_init__(self):
        n = len(self.q_ref)
        if n < 4:
            raise ValueError(f"reference of {n} samples is too short for jerk objective")
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bounds must match the reference length")
        if np.any(self.lower > 0) or np.any(self.upper < 0):
            raise ValueError("bounds must satisfy lower <= 0 <= upper")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n(self) -> int:
        return len(self.q_ref)

    @property
    def fixed(self) -> np.ndarray:
        return self.lower == self.upper


@dataclass(frozen=True, eq=False)
class QpSolution:
    epsilon: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    kkt_residual: float
    solve_time: float


def regime_bounds(regimes, bounds: BoundsConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-step ``(lower, upper)`` from regime labels."""
    regimes = np.asarray(regimes)
    upper = np.where(
        regimes == Regime.DELAY, 0.0, np.where(regimes == Regime.BLEND, bounds.eps_blend, bounds.eps_path)
    ).astype(float)
    lower = -upper
    lower[regimes == Regime.DELAY] = 0.0
    return lower, upper


def build_problem(ref: ReferenceTrajectory, bounds: BoundsConfig, dt: float) -> list[QpProblem]:
    """One decoupled problem per joint."""
    if len(ref) < 4:
        raise ValueError(f"reference of {len(ref)} samples is too short for jerk objective")
    if not dt > 0:
        raise ValueError("dt must be positive")
    lower, upper = regime_bounds(ref.regimes, bounds)
    return [QpProblem(ref.samples[:, j].copy(), lower, upper, dt) for j in range(ref.n_joints)]


def solve(problem: QpProblem, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> QpSolution:
    """Solve one joint's problem with the active-set kernel.

    ``tol`` bounds the projected-gradient residual of the unscaled objective
    ``0.5 * ||D0 (q_ref + eps)||^2`` (stencil without ``dt``), so it does not
    depend on the action rate. Non-convergence is reported through
    ``converged=False`` with the last feasible iterate.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * problem.n
    t0 = time.perf_counter()
    eps, iterations, converged, kkt = _backend.jerk_box_qp(
        problem.q_ref, problem.lower, problem.upper, tol, max_iter
    )
    elapsed = time.perf_counter() - t0
    eps = np.clip(eps, problem.lower, problem.upper)
    return QpSolution(
        epsilon=eps,
        objective_value=jerk_energy(problem.q_ref + eps, problem.dt),
        iterations=int(iterations),
        converged=bool(converged),
        kkt_residual=float(kkt),
        solve_time=elapsed,
    )


def optimize_reference(
    ref: ReferenceTrajectory, bounds: BoundsConfig, dt: float, tol: float = DEFAULT_TOL, max_iter: int | None = None
) -> tuple[np.ndarray, list[QpSolution]]:
    """Build and solve every joint; returns ``(q_ref + eps, solutions)``."""
    problems = build_problem(ref, bounds, dt)
    sols = [solve(p, tol, max_iter) for p in problems]
    eps = np.stack([s.epsilon for s in sols], axis=1)
    return ref.samples + eps, sols


__all__ = [
    "JERK_STENCIL",
    "JerkOperator",
    "QpProblem",
    "QpSolution",
    "build_problem",
    "jerk_energy",
    "optimize_reference",
    "regime_bounds",
    "solve",
]
