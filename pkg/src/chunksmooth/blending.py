"""Linear blending of a previous trajectory tail into a newly arrived chunk."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import Chunk, TimingConfig, Trajectory


class Regime(enum.IntEnum):
    DELAY = 0
    BLEND = 1
    PATH = 2


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """Blended reference for one segment.

    ``delay_end`` and ``blend_end`` are inclusive local indices: the delay
    window is ``[0, delay_end]``, the blend window ``(delay_end, blend_end]``
    and the path window ``(blend_end, length)``.
    """

    samples: np.ndarray
    regimes: np.ndarray
    delay_end: int
    blend_end: int
    start_step: int = 0

    def __post_init__(self):
        n = len(self.samples)
        if not 0 <= self.delay_end < self.blend_end <= n:
            raise ValueError(
                f"need 0 <= delay_end < blend_end <= length, got {self.delay_end}, {self.blend_end}, {n}"
            )
        if len(self.regimes) != n:
            raise ValueError("regimes must match samples in length")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_joints(self) -> int:
        return self.samples.shape[1]


def regime_labels(length: int, delay_end: int, blend_end: int) -> np.ndarray:
    idx = np.arange(length)
    labels = np.full(length, Regime.PATH, dtype=np.int8)
    labels[idx <= blend_end] = Regime.BLEND
    labels[idx <= delay_end] = Regime.DELAY
    return labels


def blend_weight(step, delay_end: int, blend_end: int):
    """Blend weight ``(step - delay_end) / (blend_end - delay_end)``.

    Accepts a scalar or array of steps. Values outside the blend window are
    not clipped; callers pick the piecewise case instead.
    """
    if blend_end <= delay_end:
        raise ValueError("blend window must have non-zero length (blend_end > delay_end)")
    return (np.asarray(step, dtype=float) - delay_end) / (blend_end - delay_end)


def pad_tail(past: np.ndarray, length: int) -> np.ndarray:
    """First ``length`` rows of ``past``, extended by holding its last row."""
    if len(past) >= length:
        return past[:length]
    pad = np.repeat(past[-1:], length - len(past), axis=0)
    return np.concatenate([past, pad], axis=0)


def blend_arrays(past: np.ndarray, new: np.ndarray, delay_end: int, blend_end: int) -> np.ndarray:
    """Apply the piecewise blend to aligned arrays.

    ``past`` needs at least ``blend_end`` rows (indices ``0 .. blend_end - 1``);
    index ``blend_end`` has weight one and takes the new value exactly.
    """
    n = len(new)
    if len(past) < blend_end:
        raise ValueError(f"past tail covers {len(past)} steps, need {blend_end}")
    out = np.array(new, dtype=float, copy=True)
    out[: delay_end + 1] = past[: delay_end + 1]
    hi = min(blend_end, n)
    if hi > delay_end + 1:
        a = blend_weight(np.arange(delay_end + 1, hi), delay_end, blend_end)[:, None]
        p, q = past[delay_end + 1 : hi], new[delay_end + 1 : hi]
        # lerp form keeps agreement bitwise; the clip keeps rounding inside the hull
        out[delay_end + 1 : hi] = np.clip(p + a * (q - p), np.minimum(p, q), np.maximum(p, q))
    return out


def build_reference(
    past_tail: Trajectory,
    new_chunk: Chunk,
    timing: TimingConfig,
    delay_end: int | None = None,
    hold_short_tail: bool = True,
) -> ReferenceTrajectory:
    """Blend the trajectory ``past_tail`` into ``new_chunk``.

    The output is aligned with the chunk (same start step and length). The
    past tail must start at the chunk's start step. If it covers fewer than
    the required ``blend_end`` steps it is extended by holding its last
    sample, unless ``hold_short_tail`` is false.

    ``delay_end`` overrides the configured delay window, e.g. to absorb a
    late chunk arrival; the blend window keeps its configured length.
    """
    if past_tail.n_joints != new_chunk.n_joints:
        raise ValueError(f"joint-count mismatch: past {past_tail.n_joints}, new {new_chunk.n_joints}")
    if past_tail.start_step != new_chunk.start_step:
        raise ValueError(
            f"misaligned step indices: past tail starts at {past_tail.start_step}, "
            f"chunk at {new_chunk.start_step}"
        )
    d = timing.delay_end if delay_end is None else delay_end
    b = d + timing.blend_steps
    n = len(new_chunk)
    if b > n:
        raise ValueError(f"chunk of {n} samples is too short for blend window ending at {b}")
    past = past_tail.samples
    if len(past) < b:
        if not hold_short_tail:
            raise ValueError(f"insufficient past-tail overlap: {len(past)} < {b}")
        past = pad_tail(past, b)
    samples = blend_arrays(past, new_chunk.samples, d, b)
    samples.setflags(write=False)
    return ReferenceTrajectory(
        samples=samples,
        regimes=regime_labels(n, d, b),
        delay_end=d,
        blend_end=b,
        start_step=new_chunk.start_step,
    )
