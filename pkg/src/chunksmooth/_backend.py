"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. :func:`use` switches explicitly (tests and benchmarks).
"""

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _kernels_py


def available():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use(backend):
    """Select ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _active
    prev = name()
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif backend == "python":
        _active = _kernels_py
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return prev


def jerk_box_qp(q, lower, upper, tol, max_iter):
    return _active.jerk_box_qp(q, lower, upper, tol, max_iter)


def eval_quintic(coef, seg, s, order=0):
    return _active.eval_quintic(coef, seg, s, order)
