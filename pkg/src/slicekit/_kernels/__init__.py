"""Convolution kernel lanes.

Three interchangeable implementations of the same three functions:

* ``compiled`` -- Cython extension with the direct cross-correlation
  loops (built by setup.py; may be absent).
* ``numpy``    -- flattened matrix-multiply formulation, the fallback.
* ``loops``    -- pure-Python reference, tests only.

The active lane is picked at import time: the compiled lane when the
extension built, otherwise numpy.  Set SLICEKIT_CONV_LANE=compiled|numpy|loops
to force one (benchmarks and the lane-agreement tests use this hook).
"""

import os

import numpy as np

from . import conv_loops, conv_numpy

try:
    from . import _convcore
except ImportError:
    _convcore = None

_LANES = {"numpy": conv_numpy, "loops": conv_loops}
if _convcore is not None:
    _LANES["compiled"] = _convcore

_forced = os.environ.get("SLICEKIT_CONV_LANE")
if _forced:
    if _forced not in _LANES:
        raise ImportError(
            f"SLICEKIT_CONV_LANE={_forced!r} is not available; "
            f"choices: {sorted(_LANES)}"
        )
    ACTIVE_LANE = _forced
else:
    ACTIVE_LANE = "compiled" if "compiled" in _LANES else "numpy"

_impl = _LANES[ACTIVE_LANE]


def available_lanes():
    """Names of the lanes importable in this environment."""
    return sorted(_LANES)


def lane(name):
    """The module implementing a given lane (tests and benchmarks)."""
    return _LANES[name]


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, k, stride=1, padding=0):
    return _impl.conv2d_forward(_c(x), _c(k), stride, padding)


def conv2d_grad_input(gy, k, x_shape, stride=1, padding=0):
    return _impl.conv2d_grad_input(_c(gy), _c(k), tuple(x_shape), stride, padding)


def conv2d_grad_kernels(gy, x, k_shape, stride=1, padding=0):
    return _impl.conv2d_grad_kernels(_c(gy), _c(x), tuple(k_shape), stride, padding)
