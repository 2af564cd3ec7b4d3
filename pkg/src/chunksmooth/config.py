"""Session configuration loaded from a TOML file.

Recognised tables and keys (all optional; defaults in brackets)::

    [timing]   chunk_len_steps [50], delay_steps [5], blend_steps [10],
               action_rate_hz [30], control_rate_hz [400],
               execute_horizon_steps [chunk_len - delay - blend]
    [bounds]   eps_blend [0.02], eps_path [0.003]
    [session]  mode [LiPoQuintic], seed, chunks [100], te_m [0.01], tol [1e-8]
    [policy]   family [step], noise [0.3], n_joints [6], amplitude [0.4],
               latency [5], latency_high [none: fixed latency]
    [chain]    preset ["default-6dof" | "planar"], lengths (planar),
               links = [{a, alpha, d, theta_offset}, ...]
    [output]   dir [out]

Unknown tables or keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import BoundsConfig, ConfigError, TimingConfig, validate_config
from .kinematics import DHLink, KinematicChain, default_chain
from .scheduler import ExecutionMode, LatencyModel, PolicyStub

_KEYS = {
    "timing": {"chunk_len_steps", "delay_steps", "blend_steps", "action_rate_hz", "control_rate_hz",
               "execute_horizon_steps"},
    "bounds": {"eps_blend", "eps_path"},
    "session": {"mode", "seed", "chunks", "te_m", "tol"},
    "policy": {"family", "noise", "n_joints", "amplitude", "latency", "latency_high"},
    "chain": {"preset", "lengths", "links"},
    "output": {"dir"},
}


@dataclass
class PolicyConfig:
    family: str = "step"
    noise: float = 0.3
    n_joints: int = 6
    amplitude: float = 0.4
    latency: int = 5
    latency_high: int | None = None

    def latency_model(self) -> LatencyModel:
        return LatencyModel(self.latency, self.latency_high)


@dataclass
class SessionConfig:
    timing: TimingConfig = field(default_factory=TimingConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    mode: ExecutionMode = ExecutionMode.LIPO_QUINTIC
    seed: int | None = None
    chunks: int = 100
    te_m: float = 0.01
    tol: float = 1e-8
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    chain: KinematicChain | None = None
    out_dir: str = "out"

    def validate(self) -> "SessionConfig":
        validate_config(self.timing, self.bounds)
        if self.chunks < 1:
            raise ConfigError("chunks", "need at least one chunk")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "seed must be an unsigned 64-bit integer")
        if self.policy.latency < 0 or (self.policy.latency_high is not None
                                       and self.policy.latency_high < self.policy.latency):
            raise ConfigError("latency", "latency must satisfy 0 <= latency <= latency_high")
        if self.policy.noise < 0:
            raise ConfigError("noise", "noise magnitude must be >= 0")
        if not self.tol > 0:
            raise ConfigError("tol", "tol must be positive")
        return self

    def stub(self) -> PolicyStub:
        if self.seed is None:
            raise ConfigError("seed", "a seed is required for simulate runs")
        return PolicyStub(
            n_joints=self.policy.n_joints,
            seed=self.seed,
            family=self.policy.family,
            noise=self.policy.noise,
            amplitude=self.policy.amplitude,
            action_rate_hz=self.timing.action_rate_hz,
            latency=self.policy.latency_model(),
        )


def _chain_from(table: dict) -> KinematicChain:
    unknown = set(table) - _KEYS["chain"]
    if unknown:
        raise ConfigError("chain", f"unknown keys {sorted(unknown)}")
    if "links" in table:
        return KinematicChain(tuple(DHLink(**dict(l)) for l in table["links"]), name="config")
    preset = table.get("preset", "default-6dof")
    if preset == "planar":
        return KinematicChain.planar(*table.get("lengths", [1.0, 1.0]))
    if preset == "default-6dof":
        return default_chain()
    raise ConfigError("chain", f"unknown preset {preset!r}")


def from_dict(data: dict) -> SessionConfig:
    for table, body in data.items():
        if table not in _KEYS:
            raise ConfigError("config", f"unknown table [{table}]")
        if not isinstance(body, dict):
            raise ConfigError("config", f"[{table}] must be a table")
        if table != "chain":
            unknown = set(body) - _KEYS[table]
            if unknown:
                raise ConfigError(table, f"unknown keys {sorted(unknown)}")
    cfg = SessionConfig()
    try:
        if "timing" in data:
            cfg.timing = replace(cfg.timing, **data["timing"])
        if "bounds" in data:
            cfg.bounds = replace(cfg.bounds, **data["bounds"])
        s = data.get("session", {})
        if "mode" in s:
            cfg.mode = ExecutionMode.parse(s["mode"])
        for k in ("seed", "chunks", "te_m", "tol"):
            if k in s:
                setattr(cfg, k, s[k])
        if "policy" in data:
            cfg.policy = replace(cfg.policy, **data["policy"])
        if "chain" in data:
            cfg.chain = _chain_from(data["chain"])
        if "output" in data:
            cfg.out_dir = str(data["output"].get("dir", cfg.out_dir))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("config", str(exc)) from None
    return cfg


def load_config(path) -> SessionConfig:
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {p}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{p}: {exc}") from None
    return from_dict(data)
