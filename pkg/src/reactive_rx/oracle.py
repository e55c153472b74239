"""Independent Laplace-domain route to the channel model.

The Laplace transform of the free-molecule density is the sum of a
free-space term, an image term and a reactive correction,

    P(r, s) = E(|r - r0|) + E(r + r0 - 2a)
              - 2 X / (X + Y) * E(r + r0 - 2a),

    E(d) = exp(-kappa d) / (8 pi r r0 sqrt(D (s + k_d))),   kappa = sqrt((s + k_d)/D),
    X = k_D + s k_f / (s + k_b),   Y = a k_D kappa.

Numerically inverting these expressions gives time-domain values that
share nothing with the closed form except the parameters. The module also
checks the transformed boundary condition and the partial-fraction
expansion that the closed form relies on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BranchError, ContourError, ConvergenceWarning, DegenerateRoots, DomainError
from .params import ChannelParams

# Weideman & Trefethen (2007) optimized Talbot contour
#   z(theta) = mu * (SIGMA + NU_R * theta * cot(ALPHA * theta) + 1j * NU_I * theta)
SIGMA = -0.6122
NU_R = 0.5017
NU_I = 0.2645
ALPHA = 0.6407
CONTOUR_APEX = SIGMA + NU_R / ALPHA  # z(0) / mu

DOUBLING_TOL = 1e-6


def _kappa(s, params):
    s = np.asarray(s, dtype=complex)
    shifted = s + params.k_d
    on_cut = (shifted.imag == 0) & (shifted.real <= 0)
    if np.any(on_cut):
        raise BranchError("s + k_d lies on the branch cut (-inf, 0]")
    return np.sqrt(shifted) / math.sqrt(params.D_A)


def _terms(r, s, params, offset=0.0):
    """(free, image, correction factor 2X/(X+Y)) with exp(offset) folded in."""
    a, r0, D = params.a, params.r0, params.D_A
    kappa = _kappa(s, params)
    s = np.asarray(s, dtype=complex)
    r = np.asarray(r, dtype=float)
    root = math.sqrt(D) * kappa  # sqrt(s + k_d)
    denom = 8.0 * np.pi * r * r0 * math.sqrt(D) * root
    free = np.exp(-kappa * np.abs(r - r0) + offset) / denom
    image = np.exp(-kappa * (r + r0 - 2.0 * a) + offset) / denom
    kD = params.k_D
    X = kD + s * params.k_f / (s + params.k_b)
    Y = a * kD * kappa
    return free, image, X / (Y + X), kappa


def laplace_green(r, s, params: ChannelParams, offset=0.0):
    """Laplace transform of the free-molecule density at radius ``r``.

    ``offset`` multiplies the result by exp(offset); the checks use it to
    keep values representable at large |s|.
    """
    if np.any(np.asarray(r) < params.a):
        raise DomainError("r must be >= a")
    return _green_unchecked(r, s, params, offset)


def _green_unchecked(r, s, params, offset=0.0):
    free, image, ratio, _ = _terms(r, s, params, offset)
    return free + image - 2.0 * ratio * image


def laplace_green_dr(r, s, params: ChannelParams, offset=0.0):
    """Radial derivative of :func:`laplace_green`, term by term."""
    r = np.asarray(r, dtype=float)
    free, image, ratio, kappa = _terms(r, s, params, offset)
    sign = np.sign(r - params.r0)
    d_free = free * (-kappa * sign - 1.0 / r)
    d_image = image * (-kappa - 1.0 / r)
    return d_free + d_image - 2.0 * ratio * d_image


def laplace_impulse_response(s, params: ChannelParams, offset=0.0):
    """Transform of P_AC: the integrated surface flux 4 pi a^2 D dP/dr|_a / s."""
    s = np.asarray(s, dtype=complex)
    a = params.a
    flux = 4.0 * np.pi * a * a * params.D_A * laplace_green_dr(a, s, params, offset)
    return flux / s


@dataclass(frozen=True)
class LaplaceEvaluator:
    """Transform to invert: ``target`` is ``"green"`` (at radius ``r``) or ``"impulse"``.

    ``shift`` is the branch point offset k_d; ``decay`` is the smallest
    distance in the exp(-sqrt(s) * decay) factors, in units of s^-1/2, used
    to steer the inversion contour through the saddle point.
    """

    params: ChannelParams
    target: str = "impulse"
    r: float | None = None

    def __post_init__(self):
        if self.target not in ("green", "impulse"):
            raise DomainError(f"unknown target {self.target!r}")
        if self.target == "green":
            if self.r is None or self.r < self.params.a:
                raise DomainError("green target needs r >= a")

    @classmethod
    def green_at(cls, params, r):
        return cls(params, "green", float(r))

    @classmethod
    def impulse(cls, params):
        return cls(params, "impulse")

    @property
    def shift(self) -> float:
        return self.params.k_d

    @property
    def decay(self) -> float:
        p = self.params
        if self.target == "impulse":
            dist = p.r0 - p.a
        else:
            dist = min(abs(self.r - p.r0), self.r + p.r0 - 2.0 * p.a)
        return dist / math.sqrt(p.D_A)

    def __call__(self, s, offset=0.0):
        """Transform at ``s``, multiplied by exp(offset)."""
        if self.target == "impulse":
            return laplace_impulse_response(s, self.params, offset)
        return laplace_green(self.r, s, self.params, offset)


def contour(t: float, M: int = 32, decay: float = 0.0):
    """Nodes z_k and weights dz_k/dtheta of the inversion contour at time ``t``.

    ``M`` nodes by default; when the transform carries exp(-decay*sqrt(s))
    with decay/(2 sqrt t) > 3, the contour is scaled to pass through the
    saddle point of exp(st - decay sqrt(s)) and the node count grows in
    proportion to decay/(2 sqrt t).
    """
    if not t > 0:
        raise DomainError("t must be > 0")
    n = decay / (2.0 * math.sqrt(t))
    nodes = M if n < 3.0 else 2 * math.ceil(M * n / 6.0)
    mu = nodes / t
    saddle = (decay / (2.0 * t)) ** 2
    if saddle > CONTOUR_APEX * mu:
        mu = saddle / CONTOUR_APEX
    theta = -np.pi + (np.arange(nodes) + 0.5) * (2.0 * np.pi / nodes)
    cot = 1.0 / np.tan(ALPHA * theta)
    z = mu * (SIGMA + NU_R * theta * cot + 1j * NU_I * theta)
    dz = mu * (NU_R * cot - NU_R * ALPHA * theta / np.sin(ALPHA * theta) ** 2 + 1j * NU_I)
    return z, dz


def _invert_once(f, t, M, shift, decay):
    z, dz = contour(t, M, decay)
    if isinstance(f, LaplaceEvaluator):
        # exp(z t) folded into the transform's exponent to avoid overflow
        integrand = np.asarray(f(z - shift, offset=z * t), dtype=complex)
    else:
        integrand = np.exp(z * t) * np.asarray(f(z - shift), dtype=complex)
    if not np.all(np.isfinite(integrand)):
        raise ContourError(f"transform is not finite on the contour at t={t:g}")
    total = np.sum(integrand * dz) / (1j * z.size)
    return math.exp(-shift * t) * total.real


def invert_laplace(f, t, M: int = 32, check: bool = True, shift=None, decay=None):
    """Numerical inverse Laplace transform of ``f`` at time(s) ``t``.

    Trapezoidal rule on a Talbot-type contour with ``M`` nodes. For a
    :class:`LaplaceEvaluator` the branch shift and decay length come from
    the evaluator; plain callables may pass them explicitly. With ``check``
    the result is recomputed on 2M nodes and a ``ConvergenceWarning`` is
    emitted if the two disagree by more than 1e-6 relative.
    """
    if M < 4 or M % 2:
        raise DomainError("M must be an even integer >= 4")
    if shift is None:
        shift = getattr(f, "shift", 0.0)
    if decay is None:
        decay = getattr(f, "decay", 0.0)
    ts = np.asarray(t, dtype=float).ravel()
    if np.any(~(ts > 0)):
        raise DomainError("t must be > 0")
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        value = _invert_once(f, ti, M, shift, decay)
        if check:
            doubled = _invert_once(f, ti, 2 * M, shift, decay)
            if abs(doubled - value) > DOUBLING_TOL * max(abs(value), abs(doubled)):
                warnings.warn(
                    f"inversion at t={ti:g}: M={M} gives {value:.12g}, 2M gives {doubled:.12g}",
                    ConvergenceWarning, stacklevel=2)
        out[i] = value
    return out[0] if np.ndim(t) == 0 else out.reshape(np.shape(t))


def impulse_response_via_oracle(t, params: ChannelParams, M: int = 32, check: bool = True):
    """P_AC(t|r0) by numerical inversion of the integrated surface flux."""
    t = np.asarray(t, dtype=float)
    if params.k_f == 0.0:
        return np.zeros_like(t)[()] if t.ndim == 0 else np.zeros_like(t)
    return invert_laplace(LaplaceEvaluator.impulse(params), t, M=M, check=check)


def green_function_via_oracle(r, t, params: ChannelParams, M: int = 32, check: bool = True):
    """Free-molecule density at (r, t) by numerical inversion."""
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    out = np.empty(r.shape)
    for idx in np.ndindex(r.shape):
        f = LaplaceEvaluator.green_at(params, r[idx])
        out[idx] = invert_laplace(f, t[idx], M=M, check=check)
    return out[()] if out.ndim == 0 else out


def check_boundary_condition(s, params: ChannelParams, rel_step: float = 1e-6):
    """Residual of the transformed reactive boundary condition at r = a.

    Compares a Richardson-extrapolated central difference of the radial
    derivative with k_f s / (a k_D (s + k_b)) * P(a, s). The residual is
    scaled by |P(a, s)| * (|coefficient| + 1/a). Accepts scalar or array ``s``.
    """
    s = np.asarray(s, dtype=complex)
    a = params.a
    offset = _kappa(s, params) * (params.r0 - a)
    h = rel_step * a

    def central(step):
        return (_green_unchecked(a + step, s, params, offset)
                - _green_unchecked(a - step, s, params, offset)) / (2.0 * step)

    deriv = (4.0 * central(h / 2.0) - central(h)) / 3.0
    value = _green_unchecked(a, s, params, offset)
    coef = params.k_f * s / (a * params.k_D * s + params.k_b * a * params.k_D)
    scale = np.abs(value) * (np.abs(coef) + 1.0 / a)
    out = np.abs(deriv - coef * value) / scale
    return out[()] if out.ndim == 0 else out


def check_partial_fractions(s, params: ChannelParams, roots=None, r: float | None = None):
    """Relative residual between the eta-weighted pole sum and the reactive
    correction term of the transform, at radius ``r`` (default ``r0``).

    With k_b = k_d = 0 and no explicit roots, the double zero root cancels
    and the expansion has the single pole c2 with weight -c2.
    """
    from .analytic import cubic_coefficients, is_irreversible_nondegrading, solve_roots

    if roots is None and is_irreversible_nondegrading(params):
        c2 = cubic_coefficients(params)[0]
        poles, weights = (c2,), (-c2,)
    else:
        if roots is None:
            roots = solve_roots(params)
        if roots.degenerate:
            raise DegenerateRoots("partial fractions need distinct roots", roots=roots)
        poles, weights = roots.roots, roots.etas
    s = np.asarray(s, dtype=complex)
    r = params.r0 if r is None else float(r)
    kappa = _kappa(s, params)
    offset = kappa * (r + params.r0 - 2.0 * params.a)
    _, image, ratio, _ = _terms(r, s, params, offset)
    correction = -2.0 * ratio * image
    u = np.sqrt(s + params.k_d)
    kernel = 2.0 * image  # 1/(4 pi r r0 sqrt(D(s+k_d))) * exp(...)
    pole_sum = sum(eta / (root + u) for root, eta in zip(poles, weights))
    out = np.abs(pole_sum * kernel - correction) / np.abs(correction)
    return out[()] if out.ndim == 0 else out
