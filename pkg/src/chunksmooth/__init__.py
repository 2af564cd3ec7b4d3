"""Post-optimisation of chunked robot action streams.

Blends consecutive action chunks, minimises jerk under per-step box bounds,
and resamples to the control rate with C2 quintic segments.
"""

from . import _backend
from .blending import ReferenceTrajectory, Regime, blend_weight, build_reference
from .core import BoundsConfig, Chunk, ConfigError, TimingConfig, Trajectory, validate_config
from .jerk import JerkOperator, QpProblem, QpSolution, build_problem, jerk_energy, optimize_reference, solve
from .kinematics import DHLink, KinematicChain, default_chain, forward_kinematics, jacobian, task_space_bound
from .metrics import SmoothnessReport, compute_report
from .scheduler import ExecutionMode, LatencyModel, PolicyStub, Session, simulate, smooth_chunks, temporal_ensemble
from .spline import QuinticSpline, build_spline, sample_spline

__version__ = "0.1.0"
BACKEND = _backend.name()

__all__ = [
    "BACKEND", "BoundsConfig", "Chunk", "ConfigError", "DHLink", "ExecutionMode", "JerkOperator",
    "KinematicChain", "LatencyModel", "PolicyStub", "QpProblem", "QpSolution", "QuinticSpline",
    "ReferenceTrajectory", "Regime", "Session", "SmoothnessReport", "TimingConfig", "Trajectory",
    "blend_weight", "build_problem", "build_reference", "build_spline", "compute_report", "default_chain",
    "forward_kinematics", "jacobian", "jerk_energy", "optimize_reference", "sample_spline", "simulate",
    "smooth_chunks", "solve", "task_space_bound", "temporal_ensemble", "validate_config",
]
