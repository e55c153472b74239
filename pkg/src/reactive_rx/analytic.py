"""Closed-form channel model of a reactive spherical receiver.

A molecule released at distance ``r0`` diffuses, may degrade at rate
``k_d`` and reacts reversibly (``k_f``, ``k_b``) with the receiver surface
at radius ``a``. In the Laplace domain the surface problem reduces to a
cubic in u = sqrt(s + k_d),

    u^3 + c2 u^2 + c1 u + c0,   c2 = (1 + k_f/k_D) sqrt(D_A)/a,
                                c1 = k_b - k_d,
                                c0 = k_b sqrt(D_A)/a - k_d c2,

whose roots are -alpha, -beta, -gamma. Partial fractions over these roots
give the time-domain Green's function and channel impulse response as
sums of W(n, m) terms (see :func:`reactive_rx.specfun.w_paper`).

The irreversible case without degradation (k_b = k_d = 0) has a double
root at zero that cancels analytically; it is evaluated through its own
single-pole closed form. Any other coincidence of roots raises
:class:`DegenerateRoots` when roots are passed explicitly, and falls back
to numerical Laplace inversion when they are not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateRoots, DomainError, ImaginaryLeak, NonFiniteError, RangeError
from .params import ChannelParams
from .series import SignalSeries
from .specfun import w_paper

logger = logging.getLogger(__name__)

# a double root perturbed by rounding splits by ~sqrt(eps) relative, so the
# threshold sits a decade above that floor
DEGENERACY_TOL = 1e-7
IMAG_TOL = 1e-9
RANGE_TOL = 1e-9


@dataclass(frozen=True)
class RootTriple:
    """Roots (alpha, beta, gamma) and residues (eta1, eta2, eta3), units s^-1/2."""

    alpha: complex
    beta: complex
    gamma: complex
    eta1: complex
    eta2: complex
    eta3: complex
    degenerate: bool = False

    @property
    def roots(self) -> tuple:
        return (self.alpha, self.beta, self.gamma)

    @property
    def etas(self) -> tuple:
        return (self.eta1, self.eta2, self.eta3)


def cubic_coefficients(params: ChannelParams) -> tuple[float, float, float]:
    """(c2, c1, c0) of the monic cubic whose roots are -alpha, -beta, -gamma."""
    scale = math.sqrt(params.D_A) / params.a
    c2 = (1.0 + params.k_f / params.k_D) * scale
    c1 = params.k_b - params.k_d
    c0 = params.k_b * scale - params.k_d * c2
    return c2, c1, c0


def _cardano(c2, c1, c0):
    # depressed cubic y^3 + p y + q with x = y - c2/3
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = complex((q / 2.0) ** 2 + (p / 3.0) ** 3)
    root = disc ** 0.5
    # larger-magnitude branch avoids cancellation
    w = -q / 2.0 + root if abs(-q / 2.0 + root) >= abs(-q / 2.0 - root) else -q / 2.0 - root
    if w == 0:
        return [complex(-shift)] * 3
    cbrt = w ** (1.0 / 3.0)
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    ys = []
    for k in range(3):
        ck = cbrt * omega ** k
        ys.append(ck - p / (3.0 * ck))
    return [y - shift for y in ys]


def _polish(x, c2, c1, c0, steps=4):
    for _ in range(steps):
        f = ((x + c2) * x + c1) * x + c0
        df = (3.0 * x + 2.0 * c2) * x + c1
        if df == 0 or f == 0:
            break
        x_new = x - f / df
        f_new = ((x_new + c2) * x_new + c1) * x_new + c0
        if abs(f_new) >= abs(f):
            break
        x = x_new
    return x


def cubic_residual(x, c2, c1, c0) -> float:
    """Relative residual of the monic cubic at ``x``."""
    x = complex(x)
    f = ((x + c2) * x + c1) * x + c0
    scale = abs(x) ** 3 + abs(c2) * abs(x) ** 2 + abs(c1) * abs(x) + abs(c0)
    return abs(f) / scale if scale else abs(f)


def _conjugate_pairs(xs):
    """Snap roots to real values or exact conjugate pairs (real coefficients)."""
    xs = sorted(xs, key=lambda z: (z.real, z.imag))
    mag = max(abs(z) for z in xs) or 1.0
    real = [z for z in xs if abs(z.imag) <= 1e-13 * mag]
    if len(real) in (1, 3):
        out = [complex(z.real, 0.0) for z in real]
        cplx = [z for z in xs if abs(z.imag) > 1e-13 * mag]
        if cplx:
            z1, z2 = cplx
            re = 0.5 * (z1.real + z2.real)
            im = 0.5 * (abs(z1.imag) + abs(z2.imag))
            out += [complex(re, -im), complex(re, im)]
        return out
    return xs


def residues(alpha, beta, gamma) -> tuple[complex, complex, complex]:
    """Partial-fraction weights eta1..eta3 for roots (alpha, beta, gamma)."""
    eta1 = alpha * (gamma + alpha) * (alpha + beta) / ((gamma - alpha) * (alpha - beta))
    eta2 = beta * (gamma + beta) * (alpha + beta) / ((beta - gamma) * (alpha - beta))
    eta3 = gamma * (gamma + beta) * (alpha + gamma) / ((beta - gamma) * (gamma - alpha))
    return eta1, eta2, eta3


def solve_roots(params: ChannelParams, allow_degenerate: bool = False) -> RootTriple:
    """Solve the cubic for (alpha, beta, gamma) and the residues eta1..eta3.

    Roots come from Cardano's formula in complex arithmetic, then Newton
    polishing. They are ordered by (real part, imaginary part). If two
    roots are closer than ``1e-7 * max(|roots|, sqrt(D_A)/a)`` the triple is
    degenerate: ``DegenerateRoots`` is raised unless ``allow_degenerate``,
    in which case the residues are NaN.
    """
    c2, c1, c0 = cubic_coefficients(params)
    xs = [_polish(x, c2, c1, c0) for x in _cardano(c2, c1, c0)]
    xs = _conjugate_pairs([_polish(x, c2, c1, c0) for x in xs])
    alphas = sorted((-x for x in xs), key=lambda z: (z.real, z.imag))
    if not all(np.isfinite(z.real) and np.isfinite(z.imag) for z in alphas):
        raise NonFiniteError("non-finite cubic roots")

    scale = max(max(abs(z) for z in alphas), math.sqrt(params.D_A) / params.a)
    sep = min(abs(alphas[i] - alphas[j]) for i in range(3) for j in range(i + 1, 3))
    alpha, beta, gamma = alphas
    if sep < DEGENERACY_TOL * scale:
        nan = complex(math.nan, math.nan)
        triple = RootTriple(alpha, beta, gamma, nan, nan, nan, degenerate=True)
        if allow_degenerate:
            return triple
        raise DegenerateRoots(
            f"cubic roots coincide (separation {sep:.3g}, scale {scale:.3g})", roots=triple)
    return RootTriple(alpha, beta, gamma, *residues(alpha, beta, gamma))


def is_irreversible_nondegrading(params: ChannelParams) -> bool:
    """k_b = k_d = 0: the cubic has a double zero root that cancels exactly."""
    return params.k_b == 0.0 and params.k_d == 0.0


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise NonFiniteError("time must be finite")
    if np.any(t <= 0):
        raise DomainError("time must be > 0")
    return t


def _leak(terms):
    total = np.sum(terms, axis=0)
    magnitude = np.sum(np.abs(terms), axis=0)
    return np.where(magnitude > 0, np.abs(total.imag) / np.where(magnitude > 0, magnitude, 1.0), 0.0)


def _real_sum(terms, what):
    """Sum complex terms along axis 0 and assert the imaginary part vanishes."""
    leak = _leak(terms)
    if np.any(leak > IMAG_TOL):
        raise ImaginaryLeak(f"{what}: imaginary part {float(np.max(leak)):.3g} of term magnitude")
    return np.sum(terms, axis=0).real


def _resolve_roots(params, roots):
    if roots is None:
        return solve_roots(params)
    if roots.degenerate:
        raise DegenerateRoots("degenerate root triple passed explicitly", roots=roots)
    return roots


def green_function(r, t, params: ChannelParams, roots: RootTriple | None = None):
    """Probability density (m^-3) of a free molecule at radius ``r``, time ``t``.

    Free-space and image Gaussians plus the reactive-boundary correction
    sum_i eta_i W((r + r0 - 2a)/sqrt(4 D t), root_i sqrt(t)) / (4 pi r r0 sqrt(D)),
    all damped by exp(-k_d t). Valid for every r >= a. Broadcasts over
    ``r`` and ``t``.
    """
    r = np.asarray(r, dtype=float)
    t = _check_time(t)
    if np.any(r < params.a):
        raise DomainError("r must be >= a")
    r, t = np.broadcast_arrays(r, t)
    a, r0, D, kd = params.a, params.r0, params.D_A, params.k_d

    if is_irreversible_nondegrading(params):
        c2 = cubic_coefficients(params)[0]
        poles, weights = (c2,), (-c2,)
    else:
        try:
            roots = _resolve_roots(params, roots)
        except DegenerateRoots:
            if roots is not None:
                raise
            logger.info("degenerate roots; Green's function via numerical inversion")
            from .oracle import green_function_via_oracle
            return green_function_via_oracle(r, t, params)
        poles, weights = roots.roots, roots.etas

    four_dt = 4.0 * D * t
    dist = r + r0 - 2.0 * a
    gauss = (np.exp(-(r - r0) ** 2 / four_dt - kd * t) + np.exp(-dist ** 2 / four_dt - kd * t))
    gauss /= 8.0 * np.pi * r * r0 * np.sqrt(np.pi * D * t)
    n = dist / np.sqrt(four_dt)
    sqrt_t = np.sqrt(t)
    terms = np.stack([eta * w_paper(n, root * sqrt_t, -kd * t) for root, eta in zip(poles, weights)])
    correction = _real_sum(terms, "green_function") / (4.0 * np.pi * r * r0 * math.sqrt(D))
    out = gauss + correction
    return out[()] if out.ndim == 0 else out


def _clamp_probability(p, what):
    low, high = -RANGE_TOL, 1.0 + RANGE_TOL
    if np.any((p < low) | (p > high)):
        raise RangeError(f"{what} outside [0, 1]: min {np.min(p):.3g}, max {np.max(p):.3g}")
    return np.clip(p, 0.0, 1.0)


def _impulse_terms(n, sqrt_t, kd_t, roots):
    al, be, ga = roots.roots
    weights = (
        al / ((ga - al) * (al - be)),
        be / ((be - ga) * (al - be)),
        ga / ((be - ga) * (ga - al)),
    )
    return np.stack([w * w_paper(n, root * sqrt_t, -kd_t) for root, w in zip(roots.roots, weights)])


def imaginary_leak(t, params: ChannelParams, roots: RootTriple | None = None):
    """Imaginary part of the three-term W sum of the impulse response,
    relative to the summed term magnitudes. Zero for real roots, including
    the single real pole of the k_b = k_d = 0 case.
    """
    t = _check_time(t)
    if roots is None and is_irreversible_nondegrading(params):
        return np.zeros_like(t)[()] if t.ndim == 0 else np.zeros_like(t)
    roots = _resolve_roots(params, roots)
    n = (params.r0 - params.a) / np.sqrt(4.0 * params.D_A * t)
    out = _leak(_impulse_terms(n, np.sqrt(t), params.k_d * t, roots))
    return out[()] if out.ndim == 0 else out


def impulse_response(t, params: ChannelParams, roots: RootTriple | None = None):
    """Channel impulse response P_AC(t|r0): probability that the released
    molecule is bound at the receiver at time ``t``. Broadcasts over ``t``.
    """
    t = _check_time(t)
    a, r0, D, kd = params.a, params.r0, params.D_A, params.k_d
    if params.k_f == 0.0:
        return np.zeros_like(t)[()] if t.ndim == 0 else np.zeros_like(t)
    n = (r0 - a) / np.sqrt(4.0 * D * t)
    sqrt_t = np.sqrt(t)

    if is_irreversible_nondegrading(params):
        c2 = cubic_coefficients(params)[0]
        reach = (a / r0) * params.k_f / (params.k_f + params.k_D)
        p = reach * (special.erfc(n) - w_paper(n, c2 * sqrt_t).real)
        p = _clamp_probability(np.asarray(p), "impulse_response")
        return p[()] if p.ndim == 0 else p

    try:
        roots = _resolve_roots(params, roots)
    except DegenerateRoots:
        if roots is not None:
            raise
        logger.info("degenerate roots; impulse response via numerical inversion")
        from .oracle import impulse_response_via_oracle
        return impulse_response_via_oracle(t, params)

    total = _real_sum(_impulse_terms(n, sqrt_t, kd * t, roots), "impulse_response")
    p = params.k_f / (4.0 * np.pi * r0 * a * math.sqrt(D)) * total
    p = _clamp_probability(np.asarray(p), "impulse_response")
    return p[()] if p.ndim == 0 else p


def survival_probability(t, params: ChannelParams, roots: RootTriple | None = None):
    """S(t|r0) = 1 - P_AC(t|r0): one minus the net integrated surface flux.

    Degradation does not enter this quantity.
    """
    return 1.0 - impulse_response(t, params, roots)


def expected_received(grid, params: ChannelParams) -> SignalSeries:
    """Expected number of bound receptors N_A * P_AC(t) on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-D sequence")
    if grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be positive and strictly increasing")
    if params.N_A == 0 or params.k_f == 0:
        return SignalSeries(grid, np.zeros_like(grid), None, "count")
    roots = None
    if not is_irreversible_nondegrading(params):
        try:
            roots = solve_roots(params)
        except DegenerateRoots:
            roots = None
    values = params.N_A * np.atleast_1d(impulse_response(grid, params, roots))
    return SignalSeries(grid, values, None, "count", meta={"source": "analytic"})
