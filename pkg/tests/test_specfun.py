import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactive_rx.errors import NonFiniteInput
from reactive_rx.specfun import erfcx_complex, erfcx_real, faddeeva, w_paper

mpmath.mp.dps = 40


def mp_erfcx(x):
    x = mpmath.mpf(x)
    return float(mpmath.exp(x * x) * mpmath.erfc(x))


def mp_w(z):
    z = mpmath.mpc(z)
    return complex(mpmath.exp(-z * z) * mpmath.erfc(-1j * z))


def test_erfcx_reference_values():
    assert erfcx_real(0.0) == 1.0
    assert erfcx_real(1.0) == pytest.approx(0.42758357615580700, rel=1e-14)
    assert erfcx_real(2.0) == pytest.approx(0.25539567631050574, rel=1e-14)


@pytest.mark.parametrize("x", [-26.0, -10.0, -3.3, -0.5, 1e-8, 0.7, 5.0, 27.5, 1e3, 1e8])
def test_erfcx_against_high_precision(x):
    assert erfcx_real(x) == pytest.approx(mp_erfcx(x), rel=1e-13)


def test_erfcx_large_argument_asymptote():
    x = 1e6
    assert erfcx_real(x) * x * math.sqrt(math.pi) == pytest.approx(1.0, rel=1e-12)


def test_erfcx_positive_and_decreasing():
    xs = np.linspace(0, 200, 20001)
    v = erfcx_real(xs)
    assert np.all(v > 0)
    assert np.all(np.diff(v) < 0)


def test_erfcx_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        erfcx_real(np.inf)
    with pytest.raises(NonFiniteInput):
        faddeeva(complex(np.nan, 0))


def test_faddeeva_at_origin_and_imaginary_axis():
    assert faddeeva(0j) == 1
    for y in (0.1, 1.0, 7.0, 300.0):
        v = faddeeva(1j * y)
        assert v.imag == 0
        assert v.real == pytest.approx(erfcx_real(y), rel=1e-14)


def test_faddeeva_reference_value():
    v = faddeeva(1 + 1j)
    assert v == pytest.approx(0.30474420525691259 + 0.20821893820283163j, rel=1e-14)


def test_faddeeva_reflection_identity():
    z = 1 + 1j
    lhs = faddeeva(-z)
    rhs = 2 * np.exp(-z * z) - faddeeva(z)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


@pytest.mark.parametrize("z", [0.3 + 0.2j, 3 - 2j, -4 + 0.1j, 20 + 30j, 1e3 + 1e3j, 9e3 + 5j, -2.5 - 1.5j])
def test_faddeeva_against_high_precision(z):
    assert abs(faddeeva(z) - mp_w(z)) <= 1e-10 * abs(mp_w(z))


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-5, 50))
def test_faddeeva_conjugate_symmetry(x, y):
    z = complex(x, y)
    lhs = faddeeva(np.conj(-z))
    rhs = np.conj(faddeeva(z))
    assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_erfcx_complex_matches_real():
    assert erfcx_complex(1.5 + 0j).real == pytest.approx(erfcx_real(1.5), rel=1e-14)


def test_w_reference_values():
    assert w_paper(0, 0) == 1
    assert w_paper(0, 2).real == pytest.approx(0.25539567631050574, rel=1e-14)
    assert w_paper(3, 0).real == pytest.approx(2.209049699858544137e-5, rel=1e-13)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 50), st.floats(-5, 5))
def test_w_matches_naive_form_where_representable(n, m):
    expo = 2 * n * m + m * m
    naive = math.exp(expo) * math.erfc(n + m) if expo < 700 else math.inf
    if not (math.isfinite(naive) and naive > 1e-300):
        return
    assert w_paper(n, m).real == pytest.approx(naive, rel=1e-9)


def test_w_no_overflow_where_naive_form_overflows():
    # late-time impulse response: tiny n, large real root times sqrt(t)
    n, m = 0.0035, 275.7
    v = w_paper(n, m).real
    assert v == pytest.approx(mp_erfcx(n + m) * math.exp(-n * n), rel=1e-13)
    assert w_paper(50.0, 3.0).real == pytest.approx(
        float(mpmath.exp(300 + 9) * mpmath.erfc(53)), rel=1e-12)


def test_w_complex_against_high_precision():
    n, m = 0.8, 3.5 - 40j
    ref = complex(mpmath.exp(2 * n * mpmath.mpc(m) + mpmath.mpc(m) ** 2) * mpmath.erfc(n + mpmath.mpc(m)))
    assert abs(w_paper(n, m) - ref) <= 1e-10 * abs(ref)


def test_w_left_half_plane_against_high_precision():
    n, m = 0.2, -3.0 + 0.5j
    ref = complex(mpmath.exp(2 * n * mpmath.mpc(m) + mpmath.mpc(m) ** 2) * mpmath.erfc(n + mpmath.mpc(m)))
    assert abs(w_paper(n, m) - ref) <= 1e-12 * abs(ref)


def test_w_log_scale_folds_prefactor():
    assert w_paper(2.0, 1.0, log_scale=-3.0) == pytest.approx(math.exp(-3) * w_paper(2.0, 1.0), rel=1e-14)


def test_w_broadcasts():
    out = w_paper(np.array([0.0, 1.0, 2.0])[:, None], np.array([0.5, 1.5]))
    assert out.shape == (3, 2)
