"""Backend selection for the capital-process kernels.

The compiled extension is used when it imports; set ``GTSLLN_PURE_PYTHON=1``
to force the reference implementation. Wrappers accept 1-D (one run) or
2-D (runs x rounds) arrays and return arrays of matching rank.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("GTSLLN_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"


def _rows(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    return (a[None, :], True) if a.ndim == 1 else (a, False)


def _k0(k0, rows):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(k0, dtype=np.float64), (rows,)))


def kahan_cumsum(k0, increments, impl=None):
    """Running capital ``K_0, K_0 + d_1, ...`` with compensated summation."""
    impl = impl or _impl
    inc, flat = _rows(increments)
    out = impl.kahan_cumsum(_k0(k0, inc.shape[0]), inc)
    return out[0] if flat else out


def product_capital(k0, factors, impl=None):
    """``K_n = K_{n-1} * (1 + f_n)``."""
    impl = impl or _impl
    f, flat = _rows(factors)
    out = impl.product_capital(_k0(k0, f.shape[0]), f)
    return out[0] if flat else out


def trapezoid_sums(t, weight_exp=2.0, impl=None):
    """Per-round ``sum_{k<n} (k+1)**w T_k(t_n)`` for the underlying ``t``."""
    impl = impl or _impl
    tt, flat = _rows(t)
    out = impl.trapezoid_sums(tt, float(weight_exp))
    return out[0] if flat else out


def upcrossing_overlay(capital, a, b, k0, impl=None):
    impl = impl or _impl
    c, flat = _rows(capital)
    out = impl.upcrossing_overlay(c, float(a), float(b), float(k0))
    return out[0] if flat else out


def upcrossing_count(capital, a, b, impl=None):
    impl = impl or _impl
    c, flat = _rows(capital)
    out = impl.upcrossing_count(c, float(a), float(b))
    return int(out[0]) if flat else out
