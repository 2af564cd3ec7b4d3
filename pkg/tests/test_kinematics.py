import numpy as np
import pytest
from oracles import finite_difference_jacobian, fk_planar

from chunksmooth.core import Trajectory
from chunksmooth.kinematics import (
    NORM_SPECTRAL,
    NORM_VERTEX,
    DHLink,
    KinematicChain,
    default_chain,
    forward_kinematics,
    inf_to_2_norm,
    jacobian,
    sign_vertices,
    task_space_bound,
)

TWO = KinematicChain.planar(1.0, 1.0)


def test_planar_fk_examples():
    np.testing.assert_allclose(forward_kinematics(TWO, [0, 0]), [2, 0, 0], atol=1e-15)
    np.testing.assert_allclose(forward_kinematics(TWO, [np.pi / 2, 0]), [0, 2, 0], atol=1e-15)
    q = [np.pi / 4, np.pi / 4]
    np.testing.assert_allclose(
        forward_kinematics(TWO, q), [np.cos(np.pi / 4), np.sin(np.pi / 4) + 1, 0], atol=1e-15
    )


def test_planar_fk_matches_closed_form():
    rng = np.random.default_rng(0)
    L = [0.7, 0.4, 0.25]
    ch = KinematicChain.planar(*L)
    for _ in range(50):
        q = rng.uniform(-np.pi, np.pi, 3)
        np.testing.assert_allclose(forward_kinematics(ch, q), fk_planar(L, q), atol=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        forward_kinematics(TWO, [0.0])
    with pytest.raises(ValueError):
        jacobian(TWO, [0.0, 0.0, 0.0])


def test_jacobian_examples():
    one = KinematicChain.planar(0.5)
    np.testing.assert_allclose(jacobian(one, [0.0])[:, 0], [0, 0.5, 0], atol=1e-16)
    np.testing.assert_allclose(np.linalg.norm(jacobian(TWO, [0, 0]), axis=0), [2, 1], atol=1e-15)


@pytest.mark.parametrize("chain", [TWO, default_chain(), KinematicChain.planar(0.3, 0.2, 0.1)])
def test_jacobian_matches_finite_differences(chain):
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, chain.n)
        fd = finite_difference_jacobian(lambda z: forward_kinematics(chain, z), q)
        np.testing.assert_allclose(jacobian(chain, q), fd, atol=1e-6)


def test_chain_validation():
    with pytest.raises(ValueError):
        KinematicChain(())
    with pytest.raises(ValueError):
        KinematicChain((DHLink(a=np.nan),))
    ch = KinematicChain(({"a": 1.0},))
    assert isinstance(ch.links[0], DHLink)


def test_single_link_bound():
    q = np.random.default_rng(2).uniform(-3, 3, (25, 1))
    rep = task_space_bound(KinematicChain.planar(0.5), q, 0.02)
    np.testing.assert_allclose(rep.bounds, 0.01, rtol=1e-15, atol=0)
    assert task_space_bound(KinematicChain.planar(0.5), [[0.0]], 0.02).bounds[0] == 0.01
    assert rep.norm_convention == NORM_VERTEX


def test_zero_eps_gives_zero():
    rep = task_space_bound(default_chain(), np.zeros((5, 6)), 0.0)
    assert np.all(rep.bounds == 0.0) and rep.session_max == 0.0


def test_two_link_vertex_bound_between_spectral_limits():
    J = jacobian(TWO, [0.0, 0.0])
    rep = task_space_bound(TWO, [[0.0, 0.0]], 0.003)
    brute = max(np.linalg.norm(J @ np.array(s)) for s in [(1, 1), (1, -1), (-1, 1), (-1, -1)]) * 0.003
    assert rep.bounds[0] == pytest.approx(brute, rel=1e-15)
    sig = np.linalg.norm(J, 2) * 0.003
    assert sig - 1e-15 <= rep.bounds[0] <= np.sqrt(2) * sig + 1e-15


def test_vertex_is_attained():
    rng = np.random.default_rng(3)
    ch = default_chain()
    q = rng.uniform(-2, 2, (30, 6))
    rep = task_space_bound(ch, q, 0.003)
    for qi, b, v in zip(q, rep.bounds, rep.worst_vertices):
        assert np.linalg.norm(jacobian(ch, qi) @ (0.003 * v)) == pytest.approx(b, abs=1e-9)


def test_bound_linear_in_eps():
    q = np.random.default_rng(4).uniform(-2, 2, (10, 6))
    a = task_space_bound(default_chain(), q, 0.003).bounds
    b = task_space_bound(default_chain(), q, 0.006).bounds
    np.testing.assert_array_equal(b, 2 * a)


def test_first_order_soundness():
    rng = np.random.default_rng(5)
    ch = default_chain()
    for _ in range(200):
        q = rng.uniform(-np.pi, np.pi, 6)
        e_bar = rng.uniform(0, 1e-3)
        eps = rng.uniform(-e_bar, e_bar, 6)
        true = np.linalg.norm(forward_kinematics(ch, q + eps) - forward_kinematics(ch, q))
        bound = task_space_bound(ch, q[None], e_bar).bounds[0]
        assert true <= bound + 10 * 6 * e_bar**2


def test_extended_posture_is_most_sensitive():
    grid = np.linspace(-np.pi, np.pi, 73)
    q = np.array([(a, b) for a in grid for b in grid])
    rep = task_space_bound(TWO, q, 0.01)
    assert abs(q[rep.argmax, 1]) < 1e-12
    assert rep.session_max >= rep.bounds.max()


def test_large_chain_uses_spectral_fallback():
    ch = KinematicChain.planar(*([0.05] * 21))
    rep = task_space_bound(ch, np.zeros((1, 21)), 0.001)
    assert rep.norm_convention == NORM_SPECTRAL
    J = jacobian(ch, np.zeros(21))
    assert rep.bounds[0] == pytest.approx(np.sqrt(21) * np.linalg.norm(J, 2) * 0.001)


def test_sign_vertices_and_norm():
    v = sign_vertices(3)
    assert v.shape == (4, 3) and np.all(v[:, 0] == 1)
    J = np.array([[1.0, -2.0], [0.0, 0.5]])
    n, s = inf_to_2_norm(J)
    assert n == pytest.approx(np.linalg.norm(J @ s)) and n == pytest.approx(np.hypot(3.0, 0.5))


def test_trajectory_input_and_errors():
    tr = Trajectory(np.zeros((3, 2)), 30.0)
    assert len(task_space_bound(TWO, tr, 0.01).bounds) == 3
    with pytest.raises(ValueError):
        task_space_bound(TWO, tr, -0.1)
    with pytest.raises(ValueError):
        task_space_bound(default_chain(), tr, 0.01)
