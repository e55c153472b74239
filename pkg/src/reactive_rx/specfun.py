"""Scaled error-function kernels for real and complex arguments.

The Faddeeva function w(z) = exp(-z^2) erfc(-iz) and the real scaled
complementary error function erfcx(x) = exp(x^2) erfc(x) are taken from
``scipy.special`` (Steven G. Johnson's Faddeeva package); this module adds
argument checking and the overflow-safe evaluation of

    W(n, m) = exp(2nm + m^2) erfc(n + m)

which is the kernel of the closed-form Green's function.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import NonFiniteInput


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("special-function argument must be finite")


def erfcx_real(x):
    """exp(x**2) * erfc(x) for real ``x``; accepts scalars or arrays.

    Overflows (returns inf) only where the true value exceeds the double
    range, i.e. for x below about -26.6.
    """
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    out = special.erfcx(x)
    return out[()] if out.ndim == 0 else out


def faddeeva(z):
    """Faddeeva function w(z) = exp(-z**2) * erfc(-1j*z)."""
    z = np.asarray(z, dtype=complex)
    _check_finite(z.real, z.imag)
    out = special.wofz(z)
    return out[()] if out.ndim == 0 else out


def erfcx_complex(z):
    """exp(z**2) * erfc(z) for complex ``z``, equal to w(1j*z)."""
    return faddeeva(1j * np.asarray(z, dtype=complex))


def w_paper(n, m, log_scale=0.0):
    """W(n, m) = exp(2nm + m**2) * erfc(n + m), times ``exp(log_scale)``.

    Evaluated as exp(-n**2 + log_scale) * erfcx(n + m); in the left half
    plane of n + m the reflection erfcx(z) = 2 exp(z**2) - erfcx(-z) keeps
    both parts finite whenever the result is representable. ``log_scale``
    lets callers fold a decaying prefactor into the exponent before it can
    overflow.
    """
    n = np.asarray(n, dtype=complex)
    m = np.asarray(m, dtype=complex)
    log_scale = np.asarray(log_scale, dtype=float)
    _check_finite(n.real, n.imag, m.real, m.imag, log_scale)
    n, m, log_scale = np.broadcast_arrays(n, m, log_scale)
    z = n + m
    out = np.empty(z.shape, dtype=complex)

    right = z.real >= 0
    if np.any(right):
        nr = n[right]
        out[right] = np.exp(-nr * nr + log_scale[right]) * special.wofz(1j * z[right])
    left = ~right
    if np.any(left):
        nl, ml, zl = n[left], m[left], z[left]
        out[left] = (2.0 * np.exp(2.0 * nl * ml + ml * ml + log_scale[left])
                     - np.exp(-nl * nl + log_scale[left]) * special.wofz(-1j * zl))
    return out[()] if out.ndim == 0 else out
