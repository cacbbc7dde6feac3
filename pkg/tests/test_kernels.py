import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gtslln import _kernels_py, kernels
from gtslln.hedges import trapezoid_value

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
vals = arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 40)), elements=st.floats(-50, 50))


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@compiled
@given(a=vals)
def test_backends_agree_bit_for_bit(a):
    k0 = np.linspace(0.5, 2.0, a.shape[0])
    for fn, args in (
        ("kahan_cumsum", (k0, a)),
        ("product_capital", (k0, a / 100.0)),
        ("trapezoid_sums", (np.abs(a), 2.0)),
        ("trapezoid_sums", (np.abs(a), 4.0 / 3.0)),
        ("upcrossing_overlay", (np.abs(a), 3.0, 20.0, 3.0)),
        ("upcrossing_count", (np.abs(a), 3.0, 20.0)),
    ):
        got = getattr(kernels, fn)(*args)
        want = getattr(kernels, fn)(*args, impl=_kernels_py)
        assert np.array_equal(got, want), fn


def test_kahan_cumsum_does_not_drift():
    inc = np.full(10**6, 0.1)
    out = kernels.kahan_cumsum(1.0, inc)
    exact = math.fsum([1.0] + [0.1] * 10**6)
    assert abs(out[-1] - exact) <= 2 * np.spacing(exact)
    assert abs(np.cumsum(np.r_[1.0, inc])[-1] - exact) > 10 * np.spacing(exact)
    assert out[0] == 1.0 and len(out) == len(inc) + 1


def test_product_capital():
    assert np.allclose(kernels.product_capital(2.0, [0.5, -0.5, 1.0]), [2.0, 3.0, 1.5, 3.0])


@given(t=arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 40)), w=st.sampled_from([2.0, 1.25, 2 / 1.5]))
def test_trapezoid_sums_matches_direct_sum(t, w):
    got = kernels.trapezoid_sums(t, w)
    for i, tv in enumerate(t):
        want = sum((k + 1.0) ** w * trapezoid_value(tv, k) for k in range(i + 1))
        assert got[i] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_trapezoid_sums_identity_for_unit_weights():
    # sum_k (k+1) T_k(t) = 1 + 2t once all trapezoids covering t are included
    t = np.linspace(0, 30, 301)
    got = kernels.trapezoid_sums(t[None, :], 1.0)
    full = np.array([sum((k + 1.0) * trapezoid_value(tv, k) for k in range(40)) for tv in t])
    assert np.allclose(full, 1 + 2 * t)
    n = np.arange(1, len(t) + 1)
    assert np.allclose(got[0][t <= n - 2], (1 + 2 * t)[t <= n - 2])


def test_upcrossing_count_examples():
    assert kernels.upcrossing_count([0, 2, 0, 2, 0], 0.5, 1.5) == 2
    assert kernels.upcrossing_count([1.0] * 5, 0.5, 1.5) == 0
    assert kernels.upcrossing_count(np.linspace(0, 3, 20), 0.5, 1.5) == 1


def test_upcrossing_overlay_holds_only_between_levels():
    cap = np.array([1.0, 0.4, 0.2, 1.0, 2.0, 3.0, 0.3, 1.6])
    out = kernels.upcrossing_overlay(cap, 0.5, 1.5, 0.5)
    # active from round 2 (prev 0.4) through round 4 (prev 1.0); off at round 5 (prev 2.0)
    want = [0.5, 0.5, 0.3, 1.1, 2.1, 2.1, 2.1, 2.1 + 1.3]
    assert np.allclose(out, want)


def test_kernels_accept_one_and_two_dimensional_input():
    a = np.arange(6.0).reshape(2, 3)
    assert kernels.kahan_cumsum(0.0, a).shape == (2, 4)
    assert kernels.kahan_cumsum(0.0, a[0]).shape == (4,)
    assert kernels.upcrossing_count(a, 0.5, 1.5).shape == (2,)
