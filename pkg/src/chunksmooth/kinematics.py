"""Serial-chain kinematics and the first-order task-space deviation bound.

A joint perturbation with ``||eps||_inf <= eps_bar`` moves the end effector
by roughly ``J(q) eps``; its worst case is ``||J||_{inf->2} * eps_bar``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Trajectory

VERTEX_LIMIT = 20

NORM_VERTEX = "inf->2 (exact, hypercube vertices)"
NORM_SPECTRAL = "sqrt(n)*sigma_max (upper bound)"


@dataclass(frozen=True)
class DHLink:
    """Standard Denavit-Hartenberg row for a revolute joint."""

    a: float = 0.0
    alpha: float = 0.0
    d: float = 0.0
    theta_offset: float = 0.0


@dataclass(frozen=True)
class KinematicChain:
    links: tuple[DHLink, ...]
    name: str = "chain"

    def __post_init__(self):
        links = tuple(l if isinstance(l, DHLink) else DHLink(**l) for l in self.links)
        if not links:
            raise ValueError("kinematic chain needs at least one link")
        for l in links:
            if not all(np.isfinite([l.a, l.alpha, l.d, l.theta_offset])):
                raise ValueError("DH parameters must be finite")
        object.__setattr__(self, "links", links)

    @property
    def n(self) -> int:
        return len(self.links)

    @classmethod
    def planar(cls, *lengths: float) -> "KinematicChain":
        return cls(tuple(DHLink(a=float(L)) for L in lengths), name=f"planar-{len(lengths)}")


def default_chain() -> KinematicChain:
    """Rough 6-DOF arm used when no chain is configured.

    The DH values are placeholders of plausible magnitude for a small
    desktop arm; they are not measured parameters of any specific robot.
    """
    h = np.pi / 2
    return KinematicChain(
        (
            DHLink(a=0.0, alpha=h, d=0.17),
            DHLink(a=0.25, alpha=0.0, d=0.0, theta_offset=h),
            DHLink(a=0.22, alpha=0.0, d=0.0),
            DHLink(a=0.0, alpha=h, d=0.08),
            DHLink(a=0.0, alpha=-h, d=0.08),
            DHLink(a=0.0, alpha=0.0, d=0.06),
        ),
        name="default-6dof-placeholder",
    )


def _dh(a, alpha, d, theta):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _check_q(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != chain.n:
        raise ValueError(f"expected {chain.n} joint values, got {q.size}")
    return q


def frames(chain: KinematicChain, q) -> list[np.ndarray]:
    """Base frame followed by each link frame, as 4x4 transforms."""
    q = _check_q(chain, q)
    T = np.eye(4)
    out = [T]
    for link, qi in zip(chain.links, q):
        T = T @ _dh(link.a, link.alpha, link.d, qi + link.theta_offset)
        out.append(T)
    return out


def forward_kinematics(chain: KinematicChain, q) -> np.ndarray:
    return frames(chain, q)[-1][:3, 3].copy()


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Positional Jacobian (3 x n): column i is ``z_{i-1} x (p_e - p_{i-1})``."""
    fs = frames(chain, q)
    pe = fs[-1][:3, 3]
    cols = [np.cross(T[:3, 2], pe - T[:3, 3]) for T in fs[:-1]]
    return np.stack(cols, axis=1)


def sign_vertices(n: int) -> np.ndarray:
    """Sign vectors with first entry +1 (the other half are negations)."""
    rest = np.array(list(itertools.product((1.0, -1.0), repeat=n - 1))).reshape(2 ** (n - 1), n - 1)
    return np.hstack([np.ones((rest.shape[0], 1)), rest])


def inf_to_2_norm(J: np.ndarray, vertices: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """``max_{||x||_inf <= 1} ||J x||_2`` and a maximising sign vector.

    The maximum of a convex function over the hypercube is attained at a
    vertex, so enumerating sign vectors is exact.
    """
    if vertices is None:
        vertices = sign_vertices(J.shape[1])
    norms = np.linalg.norm(vertices @ J.T, axis=1)
    k = int(np.argmax(norms))
    return float(norms[k]), vertices[k]


@dataclass(frozen=True, eq=False)
class DeviationReport:
    jacobian_norms: np.ndarray
    bounds: np.ndarray
    eps_bar: float
    norm_convention: str
    worst_vertices: np.ndarray | None = field(default=None, repr=False)

    @property
    def session_max(self) -> float:
        return float(np.max(self.bounds)) if self.bounds.size else 0.0

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.bounds))


def task_space_bound(chain: KinematicChain, trajectory: Trajectory | np.ndarray, eps_bar: float) -> DeviationReport:
    """Worst-case first-order end-effector deviation per sample."""
    if not eps_bar >= 0:
        raise ValueError("eps_bar must be >= 0")
    qs = trajectory.samples if isinstance(trajectory, Trajectory) else np.atleast_2d(np.asarray(trajectory, float))
    if qs.shape[1] != chain.n:
        raise ValueError(f"trajectory has {qs.shape[1]} joints, chain has {chain.n}")
    exact = chain.n <= VERTEX_LIMIT
    verts = sign_vertices(chain.n) if exact else None
    norms = np.empty(len(qs))
    worst = np.empty((len(qs), chain.n)) if exact else None
    for i, q in enumerate(qs):
        J = jacobian(chain, q)
        if exact:
            norms[i], worst[i] = inf_to_2_norm(J, verts)
        else:
            norms[i] = np.sqrt(chain.n) * np.linalg.norm(J, 2)
    return DeviationReport(
        jacobian_norms=norms,
        bounds=norms * eps_bar,
        eps_bar=float(eps_bar),
        norm_convention=NORM_VERTEX if exact else NORM_SPECTRAL,
        worst_vertices=worst,
    )
