"""Smoothness and fidelity statistics of executed trajectories."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Trajectory


@dataclass(frozen=True)
class SmoothnessReport:
    max_jerk: float
    rms_jerk: float
    max_acceleration: float
    rms_acceleration: float
    max_velocity: float
    max_boundary_jump: float
    max_deviation: float
    rms_deviation: float
    stall_count: int
    n_samples: int
    rate_hz: float

    FIELDS = (
        "max_jerk",
        "rms_jerk",
        "max_acceleration",
        "rms_acceleration",
        "max_velocity",
        "max_boundary_jump",
        "max_deviation",
        "rms_deviation",
        "stall_count",
        "n_samples",
        "rate_hz",
    )

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """Flat ``key = value`` block, one key per line."""
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def csv_header(self, extra: tuple[str, ...] = ()) -> str:
        return ",".join(extra + self.FIELDS)

    def csv_row(self, extra: tuple = ()) -> str:
        d = self.as_dict()
        return ",".join([str(e) for e in extra] + [_fmt(d[k]) for k in self.FIELDS])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def velocity(x: np.ndarray, dt: float) -> np.ndarray:
    return (x[2:] - x[:-2]) / (2.0 * dt)


def acceleration(x: np.ndarray, dt: float) -> np.ndarray:
    return (x[2:] - 2.0 * x[1:-1] + x[:-2]) / dt**2


def jerk(x: np.ndarray, dt: float) -> np.ndarray:
    """Same stencil as the optimiser: ``(-1, 3, -3, 1) / dt**3``."""
    return (x[3:] - 3.0 * x[2:-1] + 3.0 * x[1:-2] - x[:-3]) / dt**3


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a * a))) if a.size else 0.0


def compute_report(
    executed: Trajectory,
    action_samples: np.ndarray | None = None,
    reference_samples: np.ndarray | None = None,
    switch_steps=(),
    stall_count: int = 0,
) -> SmoothnessReport:
    """Derivative statistics at the rate of ``executed``.

    ``action_samples`` and ``reference_samples`` are aligned action-rate
    arrays (executed vs blended reference per step, same shape); they feed
    the deviation statistics. ``switch_steps`` are indices into
    ``action_samples`` where a new chunk took over; the boundary jump is
    ``|x[s] - x[s - 1]|``.
    """
    x = executed.uniform_samples()
    dt = executed.dt
    v = velocity(x, dt)
    a = acceleration(x, dt)
    j = jerk(x, dt)

    jump = 0.0
    dev_max = dev_rms = 0.0
    if action_samples is not None:
        act = np.asarray(action_samples, dtype=float)
        for s in switch_steps:
            if 0 < s < len(act):
                jump = max(jump, _max_abs(act[s] - act[s - 1]))
        if reference_samples is not None:
            ref = np.asarray(reference_samples, dtype=float)
            if ref.shape != act.shape:
                raise ValueError(f"misaligned reference {ref.shape} vs executed {act.shape}")
            d = act - ref
            dev_max, dev_rms = _max_abs(d), _rms(d)

    return SmoothnessReport(
        max_jerk=_max_abs(j),
        rms_jerk=_rms(j),
        max_acceleration=_max_abs(a),
        rms_acceleration=_rms(a),
        max_velocity=_max_abs(v),
        max_boundary_jump=jump,
        max_deviation=dev_max,
        rms_deviation=dev_rms,
        stall_count=int(stall_count),
        n_samples=len(executed),
        rate_hz=float(executed.rate_hz),
    )
