import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dense_third_difference, enumerate_box_qp
from scipy.optimize import lsq_linear

from chunksmooth.blending import ReferenceTrajectory, regime_labels
from chunksmooth.core import BoundsConfig
from chunksmooth.jerk import JerkOperator, QpProblem, build_problem, jerk_energy, optimize_reference, solve

DT = 1 / 30


def _problem(q, lower, upper, dt=DT):
    return QpProblem(np.asarray(q, float), np.asarray(lower, float), np.asarray(upper, float), dt)


def _layout(n, d, b, eb=0.02, ep=0.003):
    lab = regime_labels(n, d, b)
    up = np.where(lab == 0, 0.0, np.where(lab == 1, eb, ep))
    lo = -up
    lo[lab == 0] = 0.0
    return lo, up


def test_operator_annihilates_quadratics_and_is_exact_on_cubics():
    t = np.arange(12.0)
    op = JerkOperator(12, 1.0)
    for poly in (np.ones_like(t), t, t**2 - 3 * t + 1):
        assert np.all(op.apply(poly) == 0.0)
    assert np.all(op.apply(t**3) == 6.0)
    np.testing.assert_array_equal(op.matrix(), dense_third_difference(12))


def test_operator_too_short():
    with pytest.raises(ValueError, match="too short for jerk objective"):
        JerkOperator(3, 1.0)


def test_jerk_energy_examples():
    t = np.arange(10.0)
    assert jerk_energy(t**3, 1.0) == 252.0
    assert jerk_energy(np.full(10, 2.5), 0.1) == 0.0
    assert jerk_energy(0.5 * t**2 + t, 0.1) == 0.0
    with pytest.raises(ValueError):
        jerk_energy([1.0, 2.0, 3.0], 1.0)


def test_build_problem_default_layout():
    n = 50
    ref = ReferenceTrajectory(np.zeros((n, 2)), regime_labels(n, 5, 15), 5, 15)
    probs = build_problem(ref, BoundsConfig(), DT)
    assert len(probs) == 2
    p = probs[0]
    assert np.all(p.lower[:6] == 0) and np.all(p.upper[:6] == 0)
    assert np.all(p.upper[6:16] == 0.02) and np.all(p.lower[6:16] == -0.02)
    assert np.all(p.upper[16:] == 0.003) and np.all(p.lower[16:] == -0.003)
    frozen = build_problem(ref, BoundsConfig(0.0, 0.0), DT)[0]
    assert np.all(frozen.lower == 0) and np.all(frozen.upper == 0)


def test_build_problem_too_short():
    ref = ReferenceTrajectory(np.zeros((3, 1)), regime_labels(3, 0, 1), 0, 1)
    with pytest.raises(ValueError, match="too short for jerk objective"):
        build_problem(ref, BoundsConfig(), DT)


def test_problem_requires_zero_feasible():
    with pytest.raises(ValueError):
        _problem(np.zeros(6), np.full(6, 0.1), np.full(6, 0.2))


def test_affine_reference_gives_zero(backend):
    lo, up = _layout(20, 3, 8)
    sol = solve(_problem(0.3 * np.arange(20.0) + 1, lo, up))
    assert np.all(sol.epsilon == 0.0)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-18)
    assert sol.converged


def test_frozen_bounds_give_zero(backend):
    q = np.random.default_rng(0).normal(size=15)
    sol = solve(_problem(q, np.zeros(15), np.zeros(15)))
    assert np.all(sol.epsilon == 0.0)
    assert sol.objective_value == pytest.approx(jerk_energy(q, DT), rel=1e-15)


def test_step_example_matches_enumeration(backend):
    q = np.array([0, 0, 0, 0, 1, 1, 1, 1.0])
    lo, up = _layout(8, 2, 5)
    sol = solve(_problem(q, lo, up))
    e_ref, _ = enumerate_box_qp(q, lo, up)
    np.testing.assert_allclose(sol.epsilon, e_ref, atol=1e-6, rtol=0)
    assert sol.converged and sol.kkt_residual <= 1e-8


def _random_instance(rng, n):
    d = int(rng.integers(2, max(3, n - 8)))
    d = max(d, n - 10)  # keep at most 9 free variables for the enumeration
    b = int(rng.integers(d + 1, n + 1))
    scale = rng.choice([1e-3, 1e-2, 0.1, 1.0])
    t = np.arange(n) / n
    q = scale * (rng.normal(size=n) + rng.normal() * np.sin(6 * t) + (t > rng.uniform()))
    eb = rng.choice([0.02, 0.005, 0.05])
    return q, *_layout(n, d, b, eb, eb * rng.uniform(0.05, 1.0))


def test_random_small_instances_match_enumeration(backend):
    rng = np.random.default_rng(42)
    for _ in range(40):
        n = int(rng.integers(6, 13))
        q, lo, up = _random_instance(rng, n)
        sol = solve(_problem(q, lo, up))
        e_ref, _ = enumerate_box_qp(q, lo, up)
        np.testing.assert_allclose(sol.epsilon, e_ref, atol=1e-6, rtol=0)


def test_matches_bounded_least_squares(backend):
    rng = np.random.default_rng(7)
    n = 50
    lo, up = _layout(n, 5, 15)
    D = dense_third_difference(n)
    free = lo != up
    for _ in range(20):
        q = np.cumsum(rng.normal(scale=0.02, size=n)) + 0.3 * (np.arange(n) > 20)
        sol = solve(_problem(q, lo, up))
        r = lsq_linear(D[:, free], -(D @ q), bounds=(lo[free], up[free]), method="bvls", tol=1e-14)
        np.testing.assert_allclose(sol.epsilon[free], r.x, atol=1e-9, rtol=0)


def test_solution_invariants_and_determinism(backend):
    rng = np.random.default_rng(5)
    n = 50
    lo, up = _layout(n, 5, 15)
    for _ in range(50):
        q = rng.normal(scale=0.1, size=n)
        p = _problem(q, lo, up)
        s1, s2 = solve(p), solve(p)
        assert np.array_equal(s1.epsilon, s2.epsilon)
        assert np.all(s1.epsilon >= lo - 1e-9) and np.all(s1.epsilon <= up + 1e-9)
        assert np.all(s1.epsilon[:6] == 0.0)
        assert s1.objective_value <= jerk_energy(q, DT)
        assert s1.converged and s1.kkt_residual <= 1e-8
        assert s1.iterations <= 10 * n


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0))
def test_monotone_in_bounds(seed, grow):
    rng = np.random.default_rng(seed)
    n = 30
    lo, up = _layout(n, 4, 12, 0.01, 0.002)
    q = rng.normal(scale=0.05, size=n)
    small = solve(_problem(q, lo, up)).objective_value
    big = solve(_problem(q, lo * grow, up * grow)).objective_value
    assert big <= small * (1 + 1e-12) + 1e-18


def test_scale_covariance_without_bounds(backend):
    rng = np.random.default_rng(11)
    n = 24
    lo, up = _layout(n, 3, 10, 1e6, 1e6)
    q = rng.normal(size=n)
    e1 = solve(_problem(q, lo, up)).epsilon
    for c in (0.5, 3.0, -2.0):
        ec = solve(_problem(c * q, lo, up)).epsilon
        np.testing.assert_allclose(ec, c * e1, rtol=1e-9, atol=1e-12)


def test_nonconvergence_is_reported(backend):
    q = np.random.default_rng(1).normal(size=50)
    lo, up = _layout(50, 5, 15)
    sol = solve(_problem(q, lo, up), max_iter=1)
    assert not sol.converged
    assert np.all(sol.epsilon >= lo) and np.all(sol.epsilon <= up)


def test_optimize_reference_per_joint():
    rng = np.random.default_rng(2)
    n = 50
    x = rng.normal(scale=0.1, size=(n, 3))
    ref = ReferenceTrajectory(x, regime_labels(n, 5, 15), 5, 15)
    out, sols = optimize_reference(ref, BoundsConfig(), DT)
    assert out.shape == x.shape and len(sols) == 3
    for j in range(3):
        single = solve(build_problem(ReferenceTrajectory(x[:, j : j + 1], ref.regimes, 5, 15), BoundsConfig(), DT)[0])
        assert np.array_equal(out[:, j], x[:, j] + single.epsilon)


def test_rejects_bad_tol():
    with pytest.raises(ValueError):
        solve(_problem(np.zeros(6), np.zeros(6), np.zeros(6)), tol=0)
