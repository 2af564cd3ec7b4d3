"""Shared value types for sampled joint trajectories and timing configuration.

Time is carried as integer step indices at the action rate; seconds only
appear at I/O boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """A configuration value violates a named invariant."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


def _as_samples(samples, n_joints: int | None = None) -> np.ndarray:
    arr = np.array(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"samples must be a non-empty (length, n_joints) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    if n_joints is not None and arr.shape[1] != n_joints:
        raise ValueError(f"expected {n_joints} joints, got {arr.shape[1]}")
    arr.setflags(write=False)
    return arr


def joint_vector(values, n_joints: int | None = None) -> np.ndarray:
    """Validate a single joint configuration and return it as a read-only array."""
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ValueError("joint vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError("joint vector entries must be finite")
    if n_joints is not None and arr.size != n_joints:
        raise ValueError(f"expected {n_joints} joints, got {arr.size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled joint trajectory.

    ``samples`` has shape ``(length, n_joints)``. When ``final_offgrid`` is set
    the last sample sits at the exact end time of the source data rather than
    on the ``1 / rate_hz`` grid (see :func:`chunksmooth.spline.sample_spline`).
    """

    samples: np.ndarray
    rate_hz: float
    start_step: int = 0
    final_offgrid: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples))
        if not self.rate_hz > 0:
            raise ValueError("rate_hz must be positive")

    @property
    def n_joints(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    def uniform_samples(self) -> np.ndarray:
        """Samples lying on the uniform grid (drops an off-grid final sample)."""
        if self.final_offgrid and len(self) > 1:
            return self.samples[:-1]
        return self.samples


@dataclass(frozen=True, eq=False)
class Chunk:
    """One policy prediction: ``samples[i]`` is scheduled for step ``start_step + i``."""

    samples: np.ndarray
    start_step: int
    inference_issue_step: int = 0
    arrival_step: int = 0
    chunk_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.samples))
        if self.arrival_step < self.inference_issue_step:
            raise ValueError("arrival_step must not precede inference_issue_step")

    @property
    def n_joints(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def latency_steps(self) -> int:
        return self.arrival_step - self.inference_issue_step

    @property
    def end_step(self) -> int:
        """One past the last scheduled step."""
        return self.start_step + len(self)


@dataclass(frozen=True)
class TimingConfig:
    chunk_len_steps: int = 50
    delay_steps: int = 5
    blend_steps: int = 10
    action_rate_hz: float = 30.0
    control_rate_hz: float = 400.0
    # None means chunk_len_steps - delay_steps - blend_steps
    execute_horizon_steps: int | None = None

    @property
    def horizon(self) -> int:
        if self.execute_horizon_steps is None:
            return self.chunk_len_steps - self.delay_steps - self.blend_steps
        return self.execute_horizon_steps

    @property
    def overlap_steps(self) -> int:
        return self.chunk_len_steps - self.horizon

    @property
    def delay_end(self) -> int:
        """Last local index of the delay window (inclusive)."""
        return self.delay_steps

    @property
    def blend_end(self) -> int:
        """Last local index of the blend window (inclusive)."""
        return self.delay_steps + self.blend_steps

    @property
    def dt(self) -> float:
        return 1.0 / self.action_rate_hz


@dataclass(frozen=True)
class BoundsConfig:
    eps_blend: float = 0.02
    eps_path: float = 0.003


def steps_to_seconds(steps: int, rate_hz: float) -> float:
    if not rate_hz > 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    return steps / rate_hz


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_config(timing: TimingConfig, bounds: BoundsConfig) -> tuple[TimingConfig, BoundsConfig]:
    """Return ``(timing, bounds)`` unchanged if every invariant holds.

    Raises
    ------
    ConfigError
        Naming the first violated invariant.
    """
    for name in ("chunk_len_steps", "delay_steps", "blend_steps"):
        if not _is_int(getattr(timing, name)):
            raise ConfigError(name, "must be an integer")
    if timing.execute_horizon_steps is not None and not _is_int(timing.execute_horizon_steps):
        raise ConfigError("execute_horizon_steps", "must be an integer")
    for name in ("action_rate_hz", "control_rate_hz"):
        v = getattr(timing, name)
        if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
            raise ConfigError(name, "must be a finite number")
    for name in ("eps_blend", "eps_path"):
        v = getattr(bounds, name)
        if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
            raise ConfigError(name, "must be a finite number")

    if timing.chunk_len_steps < 1:
        raise ConfigError("chunk_len_steps", "chunk must hold at least one sample")
    if timing.delay_steps < 0:
        raise ConfigError("delay_steps", "delay window must be >= 0")
    if timing.blend_steps < 1:
        raise ConfigError("blend_steps", "blend window must be ≥ 1")
    if timing.horizon < 1:
        raise ConfigError("execute_horizon_steps", "execute horizon must be >= 1")
    if timing.horizon > timing.chunk_len_steps:
        raise ConfigError("execute_horizon_steps", "execute horizon cannot exceed the chunk length")
    if timing.delay_steps + timing.blend_steps > timing.overlap_steps:
        raise ConfigError(
            "overlap",
            f"delay_steps + blend_steps = {timing.delay_steps + timing.blend_steps} exceeds "
            f"chunk overlap {timing.overlap_steps}",
        )
    if not timing.action_rate_hz > 0:
        raise ConfigError("action_rate_hz", "action rate must be positive")
    if not timing.control_rate_hz >= timing.action_rate_hz:
        raise ConfigError("control_rate_hz", "control rate must be >= action rate")
    if not bounds.eps_path >= 0:
        raise ConfigError("eps_path", "path bound must be >= 0")
    if not bounds.eps_blend >= bounds.eps_path:
        raise ConfigError("eps_order", "eps_blend must be >= eps_path")
    return timing, bounds
