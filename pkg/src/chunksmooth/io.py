"""Trajectory text files, CSV exports, and atomic writes.

Trajectory file layout (UTF-8, comma separated)::

    # format: chunksmooth-trajectory/1
    # rate_hz: 30
    # joint_count: 2
    # joints: j0,j1
    step,j0,j1
    # chunk 0
    0,0.1,0.2
    1,0.1,0.2
    # chunk 1
    35,0.4,0.3

``#`` lines are comments except the ``key: value`` header keys above and
``# chunk`` markers, which open a new chunk block. Step indices increase
strictly within a block, and block start steps increase strictly. Blocks may
overlap in time; that is how raw policy chunks are stored.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Chunk, Trajectory

FORMAT_VERSION = "chunksmooth-trajectory/1"


class DataError(ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: " if where else f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


@dataclass
class TrajectoryFile:
    rate_hz: float
    joint_names: list[str]
    blocks: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)  # (steps, values)
    version: str = FORMAT_VERSION

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def chunks(self) -> list[Chunk]:
        return [Chunk(v, int(s[0]), chunk_id=i) for i, (s, v) in enumerate(self.blocks)]

    def trajectory(self) -> Trajectory:
        """The file as one trajectory; requires a single gap-free block."""
        if len(self.blocks) != 1:
            raise DataError(f"expected a single trajectory block, found {len(self.blocks)} chunks")
        steps, values = self.blocks[0]
        if np.any(np.diff(steps) != 1):
            raise DataError("trajectory steps must be consecutive")
        return Trajectory(values, self.rate_hz, int(steps[0]))

    @classmethod
    def from_trajectory(cls, traj: Trajectory, joint_names=None) -> "TrajectoryFile":
        names = list(joint_names) if joint_names else [f"j{i}" for i in range(traj.n_joints)]
        steps = np.arange(len(traj)) + traj.start_step
        return cls(traj.rate_hz, names, [(steps, np.asarray(traj.samples))])

    @classmethod
    def from_chunks(cls, chunks, rate_hz: float, joint_names=None) -> "TrajectoryFile":
        chunks = list(chunks)
        n = chunks[0].n_joints
        names = list(joint_names) if joint_names else [f"j{i}" for i in range(n)]
        blocks = [(np.arange(len(c)) + c.start_step, np.asarray(c.samples)) for c in chunks]
        return cls(rate_hz, names, blocks)


def _fmt(x: float) -> str:
    return repr(float(x))


def format_trajectory_file(tf: TrajectoryFile) -> str:
    lines = [
        f"# format: {tf.version}",
        f"# rate_hz: {_fmt(tf.rate_hz)}",
        f"# joint_count: {tf.joint_count}",
        f"# joints: {','.join(tf.joint_names)}",
        "step," + ",".join(tf.joint_names),
    ]
    markers = len(tf.blocks) > 1
    for i, (steps, values) in enumerate(tf.blocks):
        if markers:
            lines.append(f"# chunk {i}")
        for s, row in zip(steps, values):
            lines.append(str(int(s)) + "," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_trajectory_file(text: str, path: str | None = None) -> TrajectoryFile:
    header: dict[str, str] = {}
    names = None
    blocks: list[tuple[list[int], list[list[float]]]] = []
    current: tuple[list[int], list[list[float]]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("chunk"):
                current = ([], [])
                blocks.append(current)
            elif ":" in body and names is None:
                k, _, v = body.partition(":")
                header[k.strip()] = v.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if names is None:
            if cells[0] != "step":
                raise DataError("expected column header line starting with 'step'", lineno, path)
            names = cells[1:]
            if not names:
                raise DataError("column header lists no joints", lineno, path)
            continue
        if len(cells) != len(names) + 1:
            raise DataError(f"row has {len(cells)} fields, expected {len(names) + 1}", lineno, path)
        try:
            step = int(cells[0])
            vals = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise DataError(f"unparseable value ({exc})", lineno, path) from None
        if not np.all(np.isfinite(vals)):
            raise DataError("non-finite joint value", lineno, path)
        if current is None:
            current = ([], [])
            blocks.append(current)
        if current[0] and step <= current[0][-1]:
            raise DataError(f"step {step} does not increase (previous {current[0][-1]})", lineno, path)
        if not current[0] and len(blocks) > 1 and blocks[-2][0] and step <= blocks[-2][0][0]:
            raise DataError(f"chunk start step {step} does not increase", lineno, path)
        current[0].append(step)
        current[1].append(vals)

    if names is None:
        raise DataError("missing column header line", None, path)
    version = header.get("format", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format version {version!r}", None, path)
    if "rate_hz" not in header:
        raise DataError("missing '# rate_hz:' header", None, path)
    try:
        rate = float(header["rate_hz"])
    except ValueError:
        raise DataError(f"bad rate_hz {header['rate_hz']!r}", None, path) from None
    if not rate > 0:
        raise DataError("rate_hz must be positive", None, path)
    if "joint_count" in header and int(header["joint_count"]) != len(names):
        raise DataError(f"joint_count {header['joint_count']} does not match {len(names)} columns", None, path)
    if "joints" in header:
        hn = [n.strip() for n in header["joints"].split(",")]
        if hn != names:
            raise DataError("'# joints:' header disagrees with the column header", None, path)
    blocks = [b for b in blocks if b[0]]
    if not blocks:
        raise DataError("file contains no samples", None, path)
    return TrajectoryFile(
        rate,
        names,
        [(np.array(s, dtype=np.int64), np.array(v, dtype=float)) for s, v in blocks],
        version=version,
    )


def read_trajectory_file(path) -> TrajectoryFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {p}: {exc.strerror}") from None
    return parse_trajectory_file(text, str(p))


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_file(path, tf: TrajectoryFile) -> None:
    atomic_write(path, format_trajectory_file(tf))


def csv_text(header: list[str], rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(_cell(c) for c in r))
    return "\n".join(out) + "\n"


def _cell(c) -> str:
    if c is None:
        return ""
    if isinstance(c, (bool, np.bool_)):
        return str(int(c))
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    if isinstance(c, (float, np.floating)):
        return _fmt(c)
    return str(c)
