import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from hflopt import _kernels


def w_ref(y):
    """``e^y (y - 1) + 1``; summed as its power series near zero to avoid cancellation."""
    if y < 0.5:
        return math.fsum((n - 1) * y**n / math.factorial(n) for n in range(2, 40))
    return math.exp(y) * (y - 1) + 1


def g_ref(y):
    return math.expm1(y) / y


class TestInversions:
    @given(k=st.floats(1e-10, 1e8))
    def test_inv_w_matches_brentq(self, k):
        y = _kernels.inv_w(k, 1e-13)
        expected = brentq(lambda v: w_ref(v) - k, 1e-8, 60.0, xtol=1e-14, rtol=1e-14)
        assert y == pytest.approx(expected, rel=1e-8)

    @given(u=st.floats(1.0 + 1e-6, 1e8))
    def test_inv_g_matches_brentq(self, u):
        y = _kernels.inv_g(u, 1e-13)
        expected = brentq(lambda v: g_ref(v) - u, 1e-12, 60.0, xtol=1e-14, rtol=1e-14)
        assert y == pytest.approx(expected, rel=1e-7)

    @given(y=st.floats(1e-6, 30.0))
    def test_inv_w_round_trip(self, y):
        assert _kernels.inv_w(_kernels._w(y), 1e-13) == pytest.approx(y, rel=1e-8)

    def test_w_series_joins_closed_form(self):
        lo, hi = _kernels._w(1e-2 * (1 - 1e-12)), w_ref(1e-2)
        assert lo == pytest.approx(hi, rel=1e-9)


class TestMinBandwidth:
    def test_zero_rate_needs_no_bandwidth(self):
        out = np.empty(1)
        iters = np.empty(1, dtype=np.int64)
        _kernels.min_bandwidth(np.array([0.0]), np.array([1e6]), 1e6, 1e-9, 200, out, iters)
        assert out[0] == 0.0

    def test_rate_above_shannon_cap_is_inf(self):
        out = np.empty(1)
        iters = np.empty(1, dtype=np.int64)
        G = 1e6
        _kernels.min_bandwidth(np.array([G / math.log(2) * 1.01]), np.array([G]), 1e9, 1e-9, 200, out, iters)
        assert math.isinf(out[0])

    @given(G=st.floats(1e3, 1e9), frac=st.floats(0.01, 0.99))
    def test_meets_rate(self, G, frac):
        b_max = 1e7
        rate = frac * _kernels.shannon_throughput(b_max, G)
        out = np.empty(1)
        iters = np.empty(1, dtype=np.int64)
        _kernels.min_bandwidth(np.array([rate]), np.array([G]), b_max, 1e-10, 200, out, iters)
        assert _kernels.shannon_throughput(out[0], G) >= rate * (1 - 1e-12)
        assert _kernels.shannon_throughput(out[0] * (1 - 1e-8), G) <= rate
