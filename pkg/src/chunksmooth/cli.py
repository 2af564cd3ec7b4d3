"""Command-line entry point: ``chunksmooth smooth | simulate | bound``.

Exit status: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import SessionConfig, load_config
from .core import ConfigError
from .io import DataError, TrajectoryFile, atomic_write, csv_text, format_trajectory_file, read_trajectory_file
from .kinematics import task_space_bound
from .scheduler import ExecutionMode, SessionResult, margin_feasible, simulate, smooth_chunks

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chunksmooth", description="Chunked action post-optimisation toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("smooth", help="smooth a file of raw chunks to a control-rate trajectory")
    s.add_argument("--config", help="session TOML file")
    s.add_argument("--input", required=True, help="trajectory file with '# chunk' markers")
    s.add_argument("--output", required=True, help="control-rate trajectory file to write")
    s.add_argument("--report", required=True, help="smoothness report (.csv for a CSV row, else key = value text)")
    s.add_argument("--mode", help="execution mode (default from config)")
    s.add_argument("--plot-data", help="optional per-step CSV of raw/blended/bounds/optimised/executed curves")

    m = sub.add_parser("simulate", help="run a seeded streaming session against the policy stub")
    m.add_argument("--config", help="session TOML file")
    m.add_argument("--chunks", type=int, help="number of chunks to execute")
    m.add_argument("--seed", type=int, help="policy stub seed (required here or in the config)")
    m.add_argument("--mode", help="execution mode name, or 'all' for a sweep over every mode")
    m.add_argument("--out-dir", help="directory for the event log, trajectories and reports")

    b = sub.add_parser("bound", help="task-space deviation bound along a joint trajectory")
    b.add_argument("--config", required=True, help="session TOML file with a [chain] table")
    b.add_argument("--input", required=True, help="joint trajectory file")
    b.add_argument("--eps", type=float, help="joint perturbation bound in rad (default: eps_blend)")
    b.add_argument("--output", required=True, help="CSV file to write")
    return p


def _config(path) -> SessionConfig:
    return load_config(path) if path else SessionConfig()


def _report_text(result: SessionResult, path: str) -> str:
    rep = result.report
    if path.endswith(".csv"):
        extra = ("mode", "inference_calls")
        return rep.csv_header(extra) + "\n" + rep.csv_row((result.mode.value, result.inference_calls)) + "\n"
    return f"mode = {result.mode.value}\ninference_calls = {result.inference_calls}\n" + rep.to_text()


def _control_file(result: SessionResult, joint_names=None) -> str:
    tr = result.control
    tf = TrajectoryFile.from_trajectory(tr, joint_names)
    tf.blocks = [(np.arange(len(tr)), tr.samples)]
    text = format_trajectory_file(tf)
    extra = f"# origin_action_step: {result.action.start_step}\n"
    if tr.final_offgrid:
        extra += "# final_offgrid: last row is at the exact end time of the action-rate input\n"
    head, _, rest = text.partition("step,")
    return head + extra + "step," + rest


def plot_rows(result: SessionResult):
    """Long-format rows: one per (segment, step, joint) over each full segment plan."""
    header = ["segment", "step", "joint", "raw", "blended", "lower", "upper", "optimized", "executed"]
    t0 = result.action.start_step
    rows = []
    for seg in result.segments:
        L = len(seg.plan)
        for i in range(L):
            step = seg.start_step + i
            executed = seg.start_step <= step < seg.end_step and 0 <= step - t0 < len(result.action)
            for j in range(seg.plan.shape[1]):
                ref = seg.reference[i, j]
                rows.append(
                    (
                        seg.segment,
                        step,
                        j,
                        seg.raw[i, j],
                        ref,
                        ref + seg.lower[i],
                        ref + seg.upper[i],
                        seg.plan[i, j],
                        result.action.samples[step - t0, j] if executed else None,
                    )
                )
    return header, rows


def summary_row(result: SessionResult, seed) -> tuple[list[str], list]:
    rep = result.report
    header = ["mode", "seed", "inference_calls"] + list(rep.FIELDS)
    d = rep.as_dict()
    return header, [result.mode.value, seed, result.inference_calls] + [d[k] for k in rep.FIELDS]


def cmd_smooth(args) -> int:
    cfg = _config(args.config).validate()
    if args.mode:
        cfg.mode = ExecutionMode.parse(args.mode)
    tf = read_trajectory_file(args.input)
    timing = replace(cfg.timing, action_rate_hz=tf.rate_hz)
    if timing.control_rate_hz < timing.action_rate_hz:
        raise DataError(f"input rate {tf.rate_hz} Hz exceeds the control rate {timing.control_rate_hz} Hz")
    if cfg.mode is ExecutionMode.TEMPORAL_ENSEMBLE:
        raise UsageError("temporal ensemble needs a live policy; use simulate")
    chunks = tf.chunks()
    for c in chunks:
        if len(c) < timing.blend_end + 1 and len(chunks) > 1:
            raise DataError(f"chunk {c.chunk_id} has {len(c)} samples; blend window needs {timing.blend_end + 1}")
    result = smooth_chunks(chunks, timing, cfg.bounds, cfg.mode, tol=cfg.tol)
    atomic_write(args.output, _control_file(result, tf.joint_names))
    atomic_write(args.report, _report_text(result, args.report))
    if args.plot_data:
        h, rows = plot_rows(result)
        atomic_write(args.plot_data, csv_text(h, rows))
    return EXIT_OK


def _write_session(out: Path, result: SessionResult, suffix: str, joint_names=None):
    atomic_write(out / f"events{suffix}.log", "\n".join(result.event_lines()) + "\n")
    atomic_write(out / f"executed{suffix}.csv", _control_file(result, joint_names))
    atomic_write(
        out / f"executed_action{suffix}.csv", format_trajectory_file(TrajectoryFile.from_trajectory(result.action))
    )
    atomic_write(out / f"report{suffix}.txt", _report_text(result, "report.txt"))
    if result.segments:
        h, rows = plot_rows(result)
        atomic_write(out / f"plot_data{suffix}.csv", csv_text(h, rows))


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    if args.chunks is not None:
        cfg.chunks = args.chunks
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    sweep = args.mode is not None and args.mode.lower() == "all"
    if args.mode and not sweep:
        cfg.mode = ExecutionMode.parse(args.mode)
    if cfg.seed is None:
        raise UsageError("simulate needs --seed (or [session] seed in the config)")
    cfg.validate()
    stub = cfg.stub()
    warn = not margin_feasible(cfg.timing, stub.latency.worst_case)
    if warn:
        print(
            f"warning: worst-case latency {stub.latency.worst_case} + delay + blend exceeds the "
            f"{cfg.timing.horizon}-step execute horizon; stalls may occur",
            file=sys.stderr,
        )
    out = Path(cfg.out_dir)
    modes = list(ExecutionMode) if sweep else [cfg.mode]
    header, rows = None, []
    for mode in modes:
        result = simulate(stub, cfg.timing, cfg.bounds, mode, cfg.chunks, te_m=cfg.te_m, tol=cfg.tol)
        _write_session(out, result, f"_{mode.value}" if sweep else "")
        header, row = summary_row(result, cfg.seed)
        rows.append(row)
        if warn and result.stall_count:
            print(f"warning: {mode.value}: {result.stall_count} stall events", file=sys.stderr)
    atomic_write(out / "summary.csv", csv_text(header, rows))
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = load_config(args.config)
    if cfg.chain is None:
        raise DataError("config has no [chain] table; the bound needs a kinematic chain")
    eps = cfg.bounds.eps_blend if args.eps is None else args.eps
    if not eps >= 0:
        raise UsageError("--eps must be >= 0")
    tf = read_trajectory_file(args.input)
    tr = tf.trajectory() if len(tf.blocks) == 1 else None
    if tr is None:
        samples = np.concatenate([v for _, v in tf.blocks])
        steps = np.concatenate([s for s, _ in tf.blocks])
    else:
        samples, steps = tr.samples, np.arange(len(tr)) + tr.start_step
    if samples.shape[1] != cfg.chain.n:
        raise DataError(f"trajectory has {samples.shape[1]} joints, chain has {cfg.chain.n}")
    rep = task_space_bound(cfg.chain, samples, eps)
    text = (
        f"# norm: {rep.norm_convention}\n# eps_bar_rad: {eps!r}\n"
        + csv_text(["step", "jacobian_norm_m_per_rad", "bound_m"], zip(steps, rep.jacobian_norms, rep.bounds))
        + f"# session_max_m: {rep.session_max!r}\n# session_max_step: {int(steps[rep.argmax])}\n"
    )
    atomic_write(args.output, text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"smooth": cmd_smooth, "simulate": cmd_simulate, "bound": cmd_bound}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"chunksmooth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError) as exc:
        print(f"chunksmooth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"chunksmooth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
