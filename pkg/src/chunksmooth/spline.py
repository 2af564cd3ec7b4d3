"""Quintic Hermite upsampling from the action rate to the control rate.

Every sample interval gets a degree-5 polynomial matching position,
velocity and acceleration at both knots, so adjacent segments share their
boundary conditions and the chain is C2 without a global solve.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _backend
from .core import Trajectory


def estimate_derivatives(samples, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and acceleration by second-order finite differences.

    Central stencils in the interior, one-sided second-order stencils at the
    two ends. Exact for quadratics everywhere.
    """
    x = np.asarray(samples, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] < 5:
        raise ValueError(f"need at least 5 samples to estimate derivatives, got {x.shape[0]}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = np.empty_like(x)
    a = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    a[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / dt**2
    # one-sided stencils written on differences so constants give exact zeros
    for k, sgn in ((0, 1), (-1, -1)):
        d1, d2, d3 = (x[k + sgn * m] - x[k] for m in (1, 2, 3))
        v[k] = sgn * (4.0 * d1 - d2) / (2.0 * dt)
        a[k] = (-5.0 * d1 + 4.0 * d2 - d3) / dt**2
    if squeeze:
        return v[:, 0], a[:, 0]
    return v, a


def hermite_coefficients(p0, v0, a0, p1, v1, a1, h: float) -> np.ndarray:
    """Coefficients ``c[0..5]`` of the quintic in normalised time ``s = tau / h``."""
    p0, v0, a0, p1, v1, a1 = (np.asarray(z, dtype=float) for z in (p0, v0, a0, p1, v1, a1))
    V0, V1 = v0 * h, v1 * h
    A0, A1 = a0 * h * h, a1 * h * h
    dp = p1 - p0
    return np.stack(
        [
            p0,
            V0,
            0.5 * A0,
            10.0 * dp - 6.0 * V0 - 4.0 * V1 - 1.5 * A0 + 0.5 * A1,
            -15.0 * dp + 8.0 * V0 + 7.0 * V1 + 1.5 * A0 - A1,
            6.0 * dp - 3.0 * V0 - 3.0 * V1 - 0.5 * A0 + 0.5 * A1,
        ]
    )


@dataclass(frozen=True, eq=False)
class QuinticSegment:
    """One interval; ``coefficients[k]`` multiplies ``tau**k`` for ``tau in [0, h]``."""

    normalized: np.ndarray  # (6, n_joints), polynomial in s = tau / h
    h: float

    @property
    def coefficients(self) -> np.ndarray:
        scale = self.h ** -np.arange(6.0)
        return self.normalized * scale[:, None]

    def evaluate(self, tau, order: int = 0) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = _backend.eval_quintic(self.normalized[None], np.zeros(tau.size, dtype=np.intp), tau / self.h, order)
        return out / self.h**order

    @property
    def boundary(self) -> dict[str, np.ndarray]:
        start = {f"{k}0": self.evaluate(0.0, o)[0] for o, k in enumerate("pva")}
        end = {f"{k}1": self.evaluate(self.h, o)[0] for o, k in enumerate("pva")}
        return start | end


class QuinticSpline(Sequence):
    """C2 chain of quintic Hermite segments over uniformly spaced knots."""

    def __init__(self, knots: np.ndarray, velocities: np.ndarray, accelerations: np.ndarray, rate_hz: float,
                 start_step: int = 0):
        self.knots = np.asarray(knots, dtype=float)
        self.velocities = np.asarray(velocities, dtype=float)
        self.accelerations = np.asarray(accelerations, dtype=float)
        self.rate_hz = float(rate_hz)
        self.h = 1.0 / self.rate_hz
        self.start_step = start_step
        k, v, a = self.knots, self.velocities, self.accelerations
        # (n_segments, 6, n_joints)
        self.coef = np.ascontiguousarray(
            np.moveaxis(hermite_coefficients(k[:-1], v[:-1], a[:-1], k[1:], v[1:], a[1:], self.h), 0, 1)
        )

    def __len__(self) -> int:
        return self.coef.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return QuinticSegment(self.coef[i], self.h)

    @property
    def n_joints(self) -> int:
        return self.knots.shape[1]

    @property
    def duration(self) -> float:
        return len(self) * self.h

    def evaluate(self, seg, s, order: int = 0) -> np.ndarray:
        """Derivative of ``order`` (per second) at normalised positions ``s`` within ``seg``."""
        return _backend.eval_quintic(self.coef, np.asarray(seg, dtype=np.intp), s, order) / self.h**order

    def at_knots(self, order: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Values just left and just right of every interior knot."""
        m = len(self)
        left = self.evaluate(np.arange(m - 1), np.ones(m - 1), order)
        right = self.evaluate(np.arange(1, m), np.zeros(m - 1), order)
        return left, right


def build_spline(samples, dt: float, velocities=None, accelerations=None, start_step: int = 0,
                 rest_start: bool = False) -> QuinticSpline:
    """Quintic Hermite spline through ``samples`` spaced ``dt`` apart.

    Missing derivatives are estimated with :func:`estimate_derivatives`.
    ``rest_start`` forces zero velocity and acceleration at the first knot.
    ``dt`` may also be an array of sample times, which must be uniform.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if np.ndim(dt):
        steps = np.diff(np.asarray(dt, dtype=float))
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
            raise ValueError("sample spacing must be uniform")
        dt = float(steps[0])
    if not dt > 0:
        raise ValueError("dt must be positive")
    if velocities is None or accelerations is None:
        v_est, a_est = estimate_derivatives(x, dt)
        v = v_est if velocities is None else velocities
        a = a_est if accelerations is None else accelerations
    else:
        v, a = velocities, accelerations
    v = np.array(v, dtype=float).reshape(x.shape)
    a = np.array(a, dtype=float).reshape(x.shape)
    if rest_start:
        v[0] = 0.0
        a[0] = 0.0
    return QuinticSpline(x, v, a, 1.0 / dt, start_step)


def _rate_ratio(action_rate_hz: float, control_rate_hz: float) -> Fraction:
    return Fraction(action_rate_hz) / Fraction(control_rate_hz)


def control_grid(n_knots: int, action_rate_hz: float, control_rate_hz: float) -> tuple[np.ndarray, np.ndarray, bool]:
    """Segment index and normalised offset of every control-rate sample.

    Exact rational stepping: sample ``j`` sits at knot position
    ``j * action_rate / control_rate``. A final sample at exactly the last
    knot is appended when it falls off the grid; the flag reports that.
    """
    if not control_rate_hz >= action_rate_hz:
        raise ValueError("control rate must be >= action rate")
    r = _rate_ratio(action_rate_hz, control_rate_hz)
    p, q = r.numerator, r.denominator
    span = n_knots - 1
    # last on-grid j with j * p / q <= span
    j_max = (span * q) // p
    j = np.arange(j_max + 1, dtype=np.int64)
    num = j * p
    seg = num // q
    frac = (num % q) / q
    offgrid = j_max * p != span * q
    if offgrid:
        seg = np.append(seg, span)
        frac = np.append(frac, 0.0)
    # sample at the final knot -> end of the last segment
    last = seg >= span
    seg = np.where(last, span - 1, seg)
    frac = np.where(last, 1.0, frac)
    return seg.astype(np.intp), frac.astype(float), bool(offgrid)


def sample_spline(spline: QuinticSpline, control_rate_hz: float) -> Trajectory:
    """Resample the spline at ``control_rate_hz``; endpoints equal first/last knots exactly."""
    n_knots = len(spline) + 1
    seg, s, offgrid = control_grid(n_knots, spline.rate_hz, control_rate_hz)
    out = spline.evaluate(seg, s, 0)
    on_knot = s == 0.0
    out[on_knot] = spline.knots[seg[on_knot]]
    out[s == 1.0] = spline.knots[seg[s == 1.0] + 1]
    return Trajectory(out, control_rate_hz, spline.start_step, final_offgrid=offgrid)


def sample_linear(samples, action_rate_hz: float, control_rate_hz: float, start_step: int = 0) -> Trajectory:
    """Piecewise-linear resampling on the same control grid as :func:`sample_spline`."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    seg, s, offgrid = control_grid(x.shape[0], action_rate_hz, control_rate_hz)
    s2 = s[:, None]
    out = x[seg] + s2 * (x[seg + 1] - x[seg])
    out[s == 0.0] = x[seg[s == 0.0]]
    out[s == 1.0] = x[seg[s == 1.0] + 1]
    return Trajectory(out, control_rate_hz, start_step, final_offgrid=offgrid)
