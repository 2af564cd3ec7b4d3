"""Compare the compiled and numpy kernels on the two hot paths.

    python benchmarks/bench_backends.py [--repeats 200] [--seed 0]

Reports median wall time per call for the jerk box QP (one 50-step joint in
the default delay/blend layout, plus a 6-joint segment) and for quintic
evaluation of one session's worth of control samples.
"""

import argparse
import statistics
import time

import numpy as np

from chunksmooth import _backend
from chunksmooth.blending import regime_labels
from chunksmooth.core import BoundsConfig, TimingConfig
from chunksmooth.jerk import regime_bounds
from chunksmooth.spline import build_spline, control_grid


def median_time(fn, repeats):
    fn()
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    timing, bounds = TimingConfig(), BoundsConfig()
    lab = regime_labels(timing.chunk_len_steps, timing.delay_end, timing.blend_end)
    lo, up = regime_bounds(lab, bounds)
    dt = timing.dt
    q6 = np.cumsum(rng.normal(scale=0.02, size=(6, timing.chunk_len_steps)), axis=1)
    q6 += 0.3 * (np.arange(timing.chunk_len_steps) > 8)

    spl = build_spline(np.cumsum(rng.normal(scale=0.01, size=(2000, 6)), axis=0), dt)
    seg, s, _ = control_grid(len(spl), timing.action_rate_hz, timing.control_rate_hz)

    rows = []
    for name in _backend.available():
        prev = _backend.use(name)
        try:
            one = median_time(lambda: _backend.jerk_box_qp(q6[0], lo, up, 1e-8, 500), args.repeats)
            six = median_time(lambda: [_backend.jerk_box_qp(q, lo, up, 1e-8, 500) for q in q6], args.repeats)
            ev = median_time(lambda: _backend.eval_quintic(spl.coef, seg, s, 0), max(args.repeats // 10, 5))
        finally:
            _backend.use(prev)
        rows.append((name, one, six, ev))

    print(f"{'backend':<10}{'QP 1 joint':>14}{'QP 6 joints':>14}{'eval ' + str(len(s)) + ' pts':>20}")
    for name, one, six, ev in rows:
        print(f"{name:<10}{one * 1e6:>11.1f} us{six * 1e3:>11.3f} ms{ev * 1e3:>17.3f} ms")
    if len(rows) == 2:
        c, p = rows
        print(f"speed-up  {p[1] / c[1]:>13.1f}x{p[2] / c[2]:>13.1f}x{p[3] / c[3]:>19.1f}x")


if __name__ == "__main__":
    main()
