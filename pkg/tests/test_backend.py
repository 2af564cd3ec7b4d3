import numpy as np
import pytest

from chunksmooth import _backend, _kernels_py
from chunksmooth.blending import regime_labels

compiled = pytest.importorskip("chunksmooth._kernels")


def _bounds(n, d, b):
    lab = regime_labels(n, d, b)
    up = np.where(lab == 0, 0.0, np.where(lab == 1, 0.02, 0.003))
    lo = -up
    lo[lab == 0] = 0.0
    return lo, up


def test_backends_agree_on_qp():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(4, 60))
        d = int(rng.integers(0, n - 1))
        b = int(rng.integers(d + 1, n + 1))
        lo, up = _bounds(n, d, b)
        q = np.cumsum(rng.normal(scale=rng.choice([1e-3, 0.02, 0.3]), size=n))
        ec, ic, cc, kc = compiled.jerk_box_qp(q, lo, up, 1e-8, 10 * n)
        ep, ip, cp, kp = _kernels_py.jerk_box_qp(q, lo, up, 1e-8, 10 * n)
        assert cc == cp and ic == ip
        D = np.diff(np.eye(n), 3, axis=0)
        fc, fp = np.sum((D @ (q + ec)) ** 2), np.sum((D @ (q + ep)) ** 2)
        assert fc == pytest.approx(fp, rel=1e-9, abs=1e-20)
        if d >= 2:
            # three pinned samples make the minimiser unique; then compare it directly
            # (banded vs dense factorisations, long free stretches have cond ~ n**6)
            np.testing.assert_allclose(ec, ep, rtol=0, atol=1e-9)


def test_backends_agree_on_quintic():
    rng = np.random.default_rng(1)
    coef = rng.normal(size=(12, 6, 3))
    seg = rng.integers(0, 12, 100).astype(np.intp)
    s = rng.uniform(0, 1, 100)
    for order in range(4):
        np.testing.assert_allclose(
            compiled.eval_quintic(coef, seg, s, order), _kernels_py.eval_quintic(coef, seg, s, order), rtol=1e-13, atol=1e-12
        )


def test_backend_switching():
    assert _backend.available() == ["compiled", "python"]
    prev = _backend.use("python")
    try:
        assert _backend.name() == "python"
    finally:
        _backend.use(prev)
    assert _backend.name() == prev
    with pytest.raises(ValueError):
        _backend.use("gpu")


def test_fully_fixed_problem():
    z = np.zeros(10)
    for k in (compiled, _kernels_py):
        eps, it, conv, kkt = k.jerk_box_qp(np.arange(10.0) ** 3, z, z, 1e-8, 100)
        assert np.all(eps == 0) and it == 0 and conv
