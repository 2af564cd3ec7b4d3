"""Inference-aware execution loop over a stream of action chunks.

Segment ``k`` starts at its chunk's ``start_step`` and executes until the
next chunk's start. For the post-optimised modes each segment is built as
blend -> box QP, and its delay window replays the previous segment's plan.
"""

from __future__ import annotations

import enum
from fractions import Fraction
import queue
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .blending import ReferenceTrajectory, Regime, blend_arrays, pad_tail, regime_labels
from .core import BoundsConfig, Chunk, TimingConfig, Trajectory
from .jerk import DEFAULT_TOL, optimize_reference, regime_bounds
from .metrics import SmoothnessReport, compute_report
from .spline import QuinticSpline, build_spline, control_grid, estimate_derivatives, hermite_coefficients, sample_linear, sample_spline


class ExecutionMode(str, enum.Enum):
    LIPO_QUINTIC = "LiPoQuintic"
    LIPO_LINEAR = "LiPoLinear"
    RAW_QUINTIC = "RawQuintic"
    RAW_LINEAR = "RawLinear"
    TEMPORAL_ENSEMBLE = "TemporalEnsemble"

    @property
    def optimized(self) -> bool:
        return self in (ExecutionMode.LIPO_QUINTIC, ExecutionMode.LIPO_LINEAR)

    @property
    def quintic(self) -> bool:
        return self is not ExecutionMode.RAW_LINEAR and self is not ExecutionMode.LIPO_LINEAR

    @classmethod
    def parse(cls, name: str) -> "ExecutionMode":
        for m in cls:
            if name.lower() in (m.value.lower(), m.name.lower()):
                return m
        if name.lower() in ("te", "temporal_ensemble"):
            return cls.TEMPORAL_ENSEMBLE
        raise ValueError(f"unknown execution mode {name!r}; choose from {[m.value for m in cls]}")


# ---------------------------------------------------------------------------
# policy stand-in


@dataclass(frozen=True)
class LatencyModel:
    """Inference latency in action steps: fixed, or uniform in ``[low, high]``."""

    low: int = 5
    high: int | None = None

    @property
    def worst_case(self) -> int:
        return self.low if self.high is None else self.high

    def sample(self, seed: int, key: int) -> int:
        if self.high is None or self.high == self.low:
            return int(self.low)
        rng = np.random.default_rng([seed, 7, key])
        return int(rng.integers(self.low, self.high + 1))


@dataclass
class PolicyStub:
    """Seeded chunk generator standing in for a learned policy.

    Families: ``"smooth"`` adds Gaussian per-chunk offsets of std ``noise``
    to a sum-of-sinusoids base; ``"step"`` adds offsets of exactly
    ``+-noise`` (random sign per joint); ``"replay"`` returns stored chunks.
    Every random draw is keyed on ``(seed, chunk start)``, so a chunk does not
    depend on which other chunks were requested.
    """

    n_joints: int = 6
    seed: int = 0
    family: str = "smooth"
    noise: float = 0.0
    amplitude: float = 0.4
    n_components: int = 3
    action_rate_hz: float = 30.0
    latency: LatencyModel = field(default_factory=LatencyModel)
    replay: list | None = None

    def __post_init__(self):
        if self.family not in ("smooth", "step", "replay"):
            raise ValueError(f"unknown policy family {self.family!r}")
        if self.family == "replay" and not self.replay:
            raise ValueError("replay family needs a non-empty chunk list")
        rng = np.random.default_rng([self.seed, 1])
        k = np.arange(1, self.n_components + 1)[:, None]
        self._amp = self.amplitude * rng.uniform(0.3, 1.0, (self.n_components, self.n_joints)) / k
        self._freq = rng.uniform(0.1, 0.8, (self.n_components, self.n_joints))
        self._phase = rng.uniform(0.0, 2 * np.pi, (self.n_components, self.n_joints))
        self._center = rng.uniform(-0.5, 0.5, self.n_joints)

    def base(self, steps) -> np.ndarray:
        t = np.asarray(steps, dtype=float)[:, None, None] / self.action_rate_hz
        return self._center + np.sum(self._amp * np.sin(2 * np.pi * self._freq * t + self._phase), axis=1)

    def offset(self, key: int) -> np.ndarray:
        if self.noise == 0.0:
            return np.zeros(self.n_joints)
        rng = np.random.default_rng([self.seed, 3, key])
        if self.family == "step":
            return self.noise * rng.choice((-1.0, 1.0), self.n_joints)
        return rng.normal(0.0, self.noise, self.n_joints)

    def predict(self, start_step: int, length: int, index: int | None = None) -> np.ndarray:
        if self.family == "replay":
            i = index if index is not None else 0
            return np.asarray(self.replay[min(i, len(self.replay) - 1)], dtype=float)
        return self.base(np.arange(start_step, start_step + length)) + self.offset(start_step)


def schedule_inference(chunk_start: int, timing: TimingConfig, worst_case_latency: int, now: int) -> int:
    """Issue step for the chunk that follows the one starting at ``chunk_start``.

    Leaves ``worst_case_latency + delay + blend`` steps of margin before the
    switch, clamped so it is never in the past.
    """
    issue = chunk_start + timing.horizon - (worst_case_latency + timing.delay_steps + timing.blend_steps)
    return max(issue, now)


def margin_feasible(timing: TimingConfig, worst_case_latency: int) -> bool:
    return worst_case_latency + timing.delay_steps + timing.blend_steps <= timing.horizon


class StubSource:
    """Chunk ``k`` starts at ``k * horizon`` and is issued per :func:`schedule_inference`."""

    def __init__(self, stub: PolicyStub, timing: TimingConfig, n_chunks: int | None = None):
        self.stub = stub
        self.timing = timing
        self.n_chunks = n_chunks

    def get(self, k: int) -> Chunk | None:
        if self.n_chunks is not None and k >= self.n_chunks:
            return None
        T = self.timing
        start = k * T.horizon
        if k == 0:
            issue = 0
        else:
            prev = (k - 1) * T.horizon
            issue = schedule_inference(prev, T, self.stub.latency.worst_case, now=prev)
        lat = self.stub.latency.sample(self.stub.seed, k)
        samples = self.stub.predict(start, T.chunk_len_steps, index=k)
        return Chunk(samples, start, inference_issue_step=issue, arrival_step=issue + lat, chunk_id=k)


class ListSource:
    """Pre-computed chunks (offline smoothing)."""

    def __init__(self, chunks):
        self.chunks = list(chunks)

    def get(self, k: int) -> Chunk | None:
        return self.chunks[k] if k < len(self.chunks) else None


def temporal_ensemble(predictions, m: float) -> np.ndarray:
    """Exponentially weighted average; ``predictions[i]`` has age ``i`` (0 = newest)."""
    preds = np.atleast_2d(np.asarray(predictions, dtype=float))
    if preds.shape[0] == 0 or preds.size == 0:
        raise ValueError("temporal ensemble needs at least one prediction")
    if np.isinf(m):
        return preds[0].copy()
    w = np.exp(-m * np.arange(preds.shape[0]))
    return (w[:, None] * preds).sum(axis=0) / w.sum()


# ---------------------------------------------------------------------------
# event log


@dataclass(frozen=True)
class Event:
    step: int
    kind: str
    segment: int
    fields: tuple = ()

    def format(self) -> str:
        parts = [f"step={self.step}", f"event={self.kind}", f"segment={self.segment}"]
        for k, v in self.fields:
            if isinstance(v, bool):
                v = int(v)
            elif isinstance(v, float):
                v = repr(v)
            parts.append(f"{k}={v}")
        return " ".join(parts)


def parse_event(line: str) -> dict:
    out = {}
    for tok in line.split():
        k, _, v = tok.partition("=")
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# session


@dataclass
class SegmentRecord:
    segment: int
    start_step: int
    end_step: int  # exclusive end of the executed range
    issue_step: int
    arrival_step: int
    delay_end: int
    blend_end: int
    dropped: bool = False
    qp_iterations: int = 0
    qp_converged: bool = True
    qp_kkt: float = 0.0
    qp_fallback: bool = False
    stalls: int = 0
    raw: np.ndarray | None = field(default=None, repr=False)
    reference: np.ndarray | None = field(default=None, repr=False)
    lower: np.ndarray | None = field(default=None, repr=False)
    upper: np.ndarray | None = field(default=None, repr=False)
    plan: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SessionResult:
    mode: ExecutionMode
    action: Trajectory
    control: Trajectory
    reference: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    regimes: np.ndarray
    segments: list
    events: list
    stall_count: int
    inference_calls: int
    report: SmoothnessReport

    @property
    def switch_steps(self) -> list[int]:
        return [s.start_step - self.action.start_step for s in self.segments[1:]]

    def event_lines(self) -> list[str]:
        """Log lines ordered by step; ties keep processing order."""
        return [e.format() for e in sorted(self.events, key=lambda e: e.step)]


class Session:
    """Step-by-step execution of a chunk stream in one :class:`ExecutionMode`.

    ``step()`` executes one action step and returns the control-rate samples
    that became final (lagging one interval, since the knot derivative needs
    the following sample). ``finish()`` flushes the last interval.
    """

    def __init__(
        self,
        source,
        timing: TimingConfig,
        bounds: BoundsConfig,
        mode: ExecutionMode = ExecutionMode.LIPO_QUINTIC,
        n_steps: int | None = None,
        rest_start: bool = True,
        prime_with_first_chunk: bool = False,
        te_m: float = 0.01,
        tol: float = DEFAULT_TOL,
        stub: PolicyStub | None = None,
    ):
        self.source = source
        self.timing = timing
        self.bounds = bounds
        self.mode = ExecutionMode(mode)
        self.n_steps = n_steps
        self.rest_start = rest_start
        self.prime = prime_with_first_chunk
        self.te_m = te_m
        self.tol = tol
        self.stub = stub if stub is not None else getattr(source, "stub", None)
        if self.mode is ExecutionMode.TEMPORAL_ENSEMBLE and self.stub is None:
            raise ValueError("temporal ensemble mode needs a policy stub")

        self.events: list[Event] = []
        self.segments: list[SegmentRecord] = []
        self.committed: list[np.ndarray] = []
        self._ref: list[np.ndarray] = []
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._reg: list[int] = []
        self.stall_count = 0
        self.inference_calls = 0
        self._k = 0
        self._plan = None
        self._plan_hold = None
        self._plan_start = 0
        self._next = None
        self._done = False
        self._emitted = 0
        self._control: list[np.ndarray] = []
        self._te_chunks = deque()
        self._lookahead = None
        self._t0 = 0

        if self.mode is ExecutionMode.TEMPORAL_ENSEMBLE:
            if n_steps is None:
                raise ValueError("temporal ensemble mode needs n_steps")
            self.t = 0
        else:
            self._next = self._fetch(0)
            if self._next is None:
                raise ValueError("chunk source is empty")
            self.t = self._next.start_step
            self._t0 = self.t
            if self.prime:
                self._plan = np.array(self._next.samples)
            else:
                self._plan = np.array(self._next.samples[:1])
            self._plan_hold = np.ones(len(self._plan), dtype=bool) if not self.prime else np.zeros(len(self._plan), bool)
            self._plan_start = self.t
            self._startup = not self.prime

    # -- chunk intake -------------------------------------------------------

    def _fetch(self, k: int) -> Chunk | None:
        return self.source.get(k)

    def _log(self, step, kind, segment, **fields):
        self.events.append(Event(step, kind, segment, tuple(fields.items())))

    def _start_segment(self, chunk: Chunk):
        T, k = self.timing, self._k
        self.inference_calls += 1
        self._log(chunk.inference_issue_step, "inference_issue", k)
        self._log(chunk.arrival_step, "chunk_arrival", k, latency=chunk.latency_steps)
        L = len(chunk)
        s = chunk.start_step
        nxt = self._fetch(k + 1)
        end = nxt.start_step if nxt is not None else s + L
        if self.n_steps is not None:
            end = min(end, self._t0 + self.n_steps)

        # past plan aligned to this segment's start; rows past its end are holds
        off = s - self._plan_start
        if off < len(self._plan):
            past, hold = self._plan[off:], self._plan_hold[off:]
        else:
            past, hold = self._plan[-1:], np.ones(1, dtype=bool)

        d = max(T.delay_end, chunk.arrival_step - s)
        b = d + T.blend_steps
        dropped = b > L
        if dropped:
            self._log(s, "chunk_dropped", k, arrival=chunk.arrival_step)
            d = b = L
        need = max(b, L)
        past_full = pad_tail(past, need)
        hold_full = np.concatenate([hold, np.ones(max(0, need - len(hold)), dtype=bool)])[:need]

        raw = np.asarray(chunk.samples, dtype=float)
        rec = SegmentRecord(k, s, end, chunk.inference_issue_step, chunk.arrival_step, d, b, dropped=dropped)
        if dropped:
            ref = past_full[:L].copy()
            regimes = np.full(L, Regime.DELAY, dtype=np.int8)
        elif self.mode.optimized:
            ref = blend_arrays(past_full, raw, d, b)
            regimes = regime_labels(L, d, b)
        else:
            ref = raw.copy()
            ref[: d + 1] = past_full[: d + 1]
            regimes = regime_labels(L, d, b)
        lower, upper = regime_bounds(regimes, self.bounds)
        if not self.mode.optimized:
            lower = np.zeros(L)
            upper = np.zeros(L)

        plan = ref
        if self.mode.optimized and not dropped and L >= 4:
            rt = ReferenceTrajectory(ref, regimes, d, b, start_step=s)
            plan, sols = optimize_reference(rt, self.bounds, T.dt, tol=self.tol)
            rec.qp_iterations = max(x.iterations for x in sols)
            rec.qp_converged = all(x.converged for x in sols)
            rec.qp_kkt = max(x.kkt_residual for x in sols)
            self._log(s, "qp", k, iterations=rec.qp_iterations, converged=rec.qp_converged, kkt=rec.qp_kkt)
            if not rec.qp_converged:
                rec.qp_fallback = True
                plan = ref
                self._log(s, "qp_fallback", k)
        plan = np.array(plan)
        plan[: d + 1] = past_full[: d + 1]
        plan_hold = np.zeros(L, dtype=bool)
        plan_hold[: d + 1] = hold_full[: d + 1]
        if dropped:
            plan_hold[:] = hold_full[:L]

        rec.raw, rec.reference, rec.plan = raw, ref, plan
        rec.lower, rec.upper = lower, upper
        self._log(s, "segment_start", k, delay_end=d, blend_end=b, end=end, dropped=dropped)
        self.segments.append(rec)
        self._plan, self._plan_hold, self._plan_start = plan, plan_hold, s
        self._regimes = regimes
        self._seg_end = end
        self._next = nxt
        self._k += 1

    # -- stepping -----------------------------------------------------------

    @property
    def done(self) -> bool:
        return self._done

    @property
    def lookahead(self) -> np.ndarray | None:
        """Planned sample after the last executed step (used for the final knot derivative)."""
        return self._lookahead

    def _te_value(self, t: int) -> np.ndarray:
        L = self.timing.chunk_len_steps
        while not self._te_chunks or self._te_chunks[0][0] < t:
            nxt = self._te_chunks[0][0] + 1 if self._te_chunks else 0
            self._te_chunks.appendleft((nxt, self.stub.predict(nxt, L)))
            self.inference_calls += 1
        while self._te_chunks[-1][0] <= t - L:
            self._te_chunks.pop()
        preds = [c[t - s] for s, c in self._te_chunks if 0 <= t - s < L]
        return temporal_ensemble(preds, self.te_m)

    def step(self) -> np.ndarray:
        """Execute one action step; returns newly final control-rate samples."""
        if self._done:
            raise RuntimeError("session already finished")
        t = self.t
        if self.mode is ExecutionMode.TEMPORAL_ENSEMBLE:
            x = self._te_value(t)
            self._record(x, x, 0.0, 0.0, Regime.PATH)
            last = t + 1 >= self._t0 + self.n_steps
            if last:
                self._lookahead = self._te_value(t + 1)
        else:
            if self._next is not None and t == self._next.start_step:
                self._start_segment(self._next)
            i = t - self._plan_start
            rec = self.segments[-1]
            x = self._plan[i]
            if self._plan_hold[i] and not (self._startup and rec.segment == 0 and i <= self.timing.delay_end):
                self.stall_count += 1
                rec.stalls += 1
                self._log(t, "stall", rec.segment)
            self._record(x, rec.reference[i], rec.lower[i], rec.upper[i], self._regimes[i])
            last = (self.n_steps is not None and t + 1 >= self._t0 + self.n_steps) or (
                self._next is None and t + 1 >= self._seg_end
            )
            if last:
                self._lookahead = self._plan[i + 1] if i + 1 < len(self._plan) else None
        self.t += 1
        out = self._emit(final=False)
        if last:
            self._done = True
            self._log(self.t, "session_end", self._k - 1, steps=len(self.committed), stalls=self.stall_count)
        return out

    def _record(self, x, ref, lo, hi, regime):
        self.committed.append(np.asarray(x, dtype=float))
        self._ref.append(np.asarray(ref, dtype=float))
        self._lo.append(np.broadcast_to(lo, np.shape(x)).astype(float))
        self._hi.append(np.broadcast_to(hi, np.shape(x)).astype(float))
        self._reg.append(int(regime))

    # -- control-rate emission ----------------------------------------------

    def _knot_derivs(self, i: int, pts: list) -> tuple[np.ndarray, np.ndarray]:
        dt = self.timing.dt
        n = len(pts)
        x = pts
        if i == 0:
            if self.rest_start:
                z = np.zeros_like(x[0])
                return z, z
            if n >= 5:
                v, a = estimate_derivatives(np.array(x[:5]), dt)
                return v[0], a[0]
        if 0 < i < n - 1:
            return (x[i + 1] - x[i - 1]) / (2.0 * dt), (x[i + 1] - 2.0 * x[i] + x[i - 1]) / dt**2
        v, a = estimate_derivatives(np.array(x[-5:]), dt)
        return v[-1], a[-1]

    def _emit(self, final: bool) -> np.ndarray:
        """Emit samples for intervals whose both knot derivatives are known."""
        T = self.timing
        pts = self.committed if not final or self._lookahead is None else self.committed + [self._lookahead]
        n_known = len(self.committed)
        outs = []
        if self._emitted == 0 and n_known >= 1:
            outs.append(self.committed[0][None])
            self._emitted = 1
        # interval (j-1, j] is final once knot j has a right neighbour
        last_interval = n_known - 1 if final else n_known - 2
        if self.mode.quintic and not self.rest_start and len(pts) < 5:
            # one-sided start stencil needs five samples
            last_interval = 0 if not final else last_interval
        while self._emitted <= last_interval:
            j = self._emitted
            p = self._frac(j, final and j == n_known - 1)
            if p.size:
                x0, x1 = self.committed[j - 1], self.committed[j]
                if self.mode.quintic:
                    v0, a0 = self._knot_derivs(j - 1, pts)
                    v1, a1 = self._knot_derivs(j, pts)
                    c = hermite_coefficients(x0, v0, a0, x1, v1, a1, T.dt)
                    out = _backend.eval_quintic(c[None], np.zeros(p.size, dtype=np.intp), p, 0)
                    out[p == 1.0] = x1
                else:
                    out = x0 + p[:, None] * (x1 - x0)
                    out[p == 1.0] = x1
                outs.append(out)
            self._emitted += 1
        if not outs:
            return np.empty((0, len(self.committed[0]) if self.committed else 0))
        block = np.concatenate(outs, axis=0)
        self._control.append(block)
        return block

    def _frac(self, j: int, include_end: bool) -> np.ndarray:
        """Normalised offsets in ``(0, 1]`` of control samples inside interval ``(j-1, j]``."""
        r = Fraction(self.timing.action_rate_hz) / Fraction(self.timing.control_rate_hz)
        p, q = r.numerator, r.denominator
        lo = ((j - 1) * q) // p + 1  # first control index strictly after knot j-1
        hi = (j * q) // p  # last control index at or before knot j
        idx = np.arange(lo, hi + 1, dtype=np.int64)
        frac = (idx * p - (j - 1) * q) / q
        if include_end and (hi * p != j * q):
            frac = np.append(frac, 1.0)
        return frac.astype(float)

    def finish(self) -> np.ndarray:
        return self._emit(final=True)

    def run(self, threaded: bool = False) -> SessionResult:
        """Run to completion; ``threaded`` moves chunk production to a worker thread."""
        if threaded and self.mode is not ExecutionMode.TEMPORAL_ENSEMBLE:
            self._run_threaded()
        else:
            while not self._done:
                self.step()
        self.finish()
        return self.result()

    def _run_threaded(self):
        # one producer fills the queue in order; the consumer owns all state
        src = self.source
        q: queue.Queue = queue.Queue(maxsize=4)
        cache: dict[int, Chunk | None] = {}
        first = 1  # chunk 0 was fetched by __init__

        def produce():
            k = first
            while True:
                c = src.get(k)
                q.put((k, c))
                if c is None:
                    return
                k += 1

        worker = threading.Thread(target=produce, daemon=True)
        worker.start()

        def fetch(k):
            while k not in cache:
                kk, c = q.get()
                cache[kk] = c
            return cache.pop(k)

        self._fetch = fetch
        try:
            while not self._done:
                self.step()
        finally:
            self._fetch = src.get
            worker.join(timeout=0.1)

    def result(self) -> SessionResult:
        action = Trajectory(np.array(self.committed), self.timing.action_rate_hz, self._t0)
        control_samples = np.concatenate(self._control, axis=0)
        n_act = len(self.committed)
        _, _, offgrid = control_grid(n_act, self.timing.action_rate_hz, self.timing.control_rate_hz) if n_act > 1 else (0, 0, False)
        control = Trajectory(control_samples, self.timing.control_rate_hz, self._t0, final_offgrid=offgrid)
        ref = np.array(self._ref)
        result = SessionResult(
            mode=self.mode,
            action=action,
            control=control,
            reference=ref,
            lower=np.array(self._lo),
            upper=np.array(self._hi),
            regimes=np.array(self._reg, dtype=np.int8),
            segments=self.segments,
            events=self.events,
            stall_count=self.stall_count,
            inference_calls=self.inference_calls,
            report=None,
        )
        result.report = compute_report(
            control,
            action_samples=action.samples,
            reference_samples=ref,
            switch_steps=result.switch_steps,
            stall_count=self.stall_count,
        )
        return result


def offline_control(result: SessionResult, timing: TimingConfig, rest_start: bool = True,
                    lookahead: np.ndarray | None = None) -> Trajectory:
    """Rebuild the control-rate output from the committed samples in one pass."""
    x = result.action.samples
    if result.mode.quintic:
        pts = x if lookahead is None else np.vstack([x, lookahead])
        sp = build_spline(pts, timing.dt, rest_start=rest_start, start_step=result.action.start_step)
        if lookahead is not None:
            sp = QuinticSpline(sp.knots[:-1], sp.velocities[:-1], sp.accelerations[:-1], sp.rate_hz, sp.start_step)
        return sample_spline(sp, timing.control_rate_hz)
    return sample_linear(x, timing.action_rate_hz, timing.control_rate_hz, result.action.start_step)


def simulate(
    stub: PolicyStub,
    timing: TimingConfig,
    bounds: BoundsConfig,
    mode: ExecutionMode,
    n_chunks: int,
    te_m: float = 0.01,
    threaded: bool = False,
    tol: float = DEFAULT_TOL,
) -> SessionResult:
    """Seeded session of ``n_chunks * horizon`` action steps."""
    n_steps = n_chunks * timing.horizon
    source = StubSource(stub, timing, n_chunks=n_chunks + 1)
    session = Session(source, timing, bounds, mode, n_steps=n_steps, rest_start=True, te_m=te_m, tol=tol, stub=stub)
    return session.run(threaded=threaded)


def smooth_chunks(chunks, timing: TimingConfig, bounds: BoundsConfig,
                  mode: ExecutionMode = ExecutionMode.LIPO_QUINTIC, tol: float = DEFAULT_TOL) -> SessionResult:
    """Offline pass over file chunks; the first chunk is its own past."""
    session = Session(ListSource(chunks), timing, bounds, mode, rest_start=False, prime_with_first_chunk=True, tol=tol)
    return session.run()
