import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chunksmooth.blending import Regime, blend_arrays, blend_weight, build_reference, regime_labels
from chunksmooth.core import Chunk, TimingConfig, Trajectory

T = TimingConfig()


def test_blend_weight_examples():
    assert blend_weight(10, 5, 15) == 0.5
    assert blend_weight(5, 5, 15) == 0.0
    assert blend_weight(15, 5, 15) == 1.0
    np.testing.assert_array_equal(blend_weight(np.array([6, 14]), 5, 15), [0.1, 0.9])


def test_blend_weight_rejects_empty_window():
    with pytest.raises(ValueError):
        blend_weight(5, 5, 5)


def test_regime_labels_layout():
    lab = regime_labels(50, 5, 15)
    assert list(lab[:6]) == [Regime.DELAY] * 6
    assert list(lab[6:16]) == [Regime.BLEND] * 10
    assert np.all(lab[16:] == Regime.PATH)


def test_two_constant_chunks():
    past = Trajectory(np.ones((50, 1)), 30.0, start_step=35)
    new = Chunk(np.zeros((50, 1)), 35)
    ref = build_reference(past, new, T)
    x = ref.samples[:, 0]
    assert np.all(x[:6] == 1.0)
    assert x[10] == 0.5
    assert np.all(x[15:] == 0.0)
    closed = 1.0 - (np.arange(6, 15) - 5) / 10.0
    np.testing.assert_allclose(x[6:15], closed, rtol=0, atol=1e-12)
    assert ref.start_step == 35 and len(ref) == 50
    assert (ref.delay_end, ref.blend_end) == (5, 15)


def test_identical_inputs_pass_through_bitwise():
    rng = np.random.default_rng(3)
    q = rng.normal(size=(50, 3))
    ref = build_reference(Trajectory(q, 30.0), Chunk(q, 0), T)
    assert np.array_equal(ref.samples, q)


def test_affine_offset_increment_bound():
    t = np.arange(50.0)[:, None]
    ref = build_reference(Trajectory(0.1 * t, 30.0), Chunk(0.1 * t + 0.3, 0), T)
    inc = np.abs(np.diff(ref.samples[:, 0]))
    assert inc.max() <= 0.1 + 0.3 / 10 + 1e-15


def test_short_past_tail_is_held():
    past = Trajectory(np.array([[0.7], [0.8]]), 30.0)
    ref = build_reference(past, Chunk(np.zeros((50, 1)), 0), T)
    assert ref.samples[0, 0] == 0.7
    assert np.all(ref.samples[1:6, 0] == 0.8)
    with pytest.raises(ValueError, match="insufficient"):
        build_reference(past, Chunk(np.zeros((50, 1)), 0), T, hold_short_tail=False)


def test_build_reference_errors():
    with pytest.raises(ValueError, match="joint-count"):
        build_reference(Trajectory(np.zeros((50, 2)), 30.0), Chunk(np.zeros((50, 1)), 0), T)
    with pytest.raises(ValueError, match="misaligned"):
        build_reference(Trajectory(np.zeros((50, 1)), 30.0, 3), Chunk(np.zeros((50, 1)), 0), T)
    with pytest.raises(ValueError, match="too short"):
        build_reference(Trajectory(np.zeros((50, 1)), 30.0), Chunk(np.zeros((10, 1)), 0), T)


def test_delay_override_shifts_blend():
    ref = build_reference(Trajectory(np.ones((50, 1)), 30.0), Chunk(np.zeros((50, 1)), 0), T, delay_end=8)
    assert np.all(ref.samples[:9, 0] == 1.0)
    assert ref.samples[13, 0] == 0.5
    assert ref.blend_end == 18


_vals = arrays(np.float64, (20, 2), elements=st.floats(-10, 10))


@given(_vals, _vals)
def test_convex_hull_and_boundaries(p, q):
    out = blend_arrays(p, q, 4, 14)
    assert np.all(out >= np.minimum(p, q)) and np.all(out <= np.maximum(p, q))
    assert np.array_equal(out[4], p[4])
    assert np.array_equal(out[14:], q[14:])


@given(_vals, _vals)
def test_mirror_symmetry(p, q):
    # blending q into p uses weight 1 - alpha where p into q uses alpha
    d, b = 4, 14
    ab = blend_arrays(p, q, d, b)
    steps = np.arange(d + 1, b)
    alpha = blend_weight(steps, d, b)
    mirror = blend_weight(d + b - steps, d, b)
    np.testing.assert_allclose(alpha, 1 - mirror, atol=1e-15)
    ba_expected = q[steps] + (1 - alpha)[:, None] * (p[steps] - q[steps])
    np.testing.assert_allclose(ab[steps], ba_expected, rtol=0, atol=1e-13 * (1 + np.abs(p).max() + np.abs(q).max()))
