"""Brownian-dynamics particle simulation of the reactive receiver.

Each step of length dt applies, in order:

1. a Gaussian displacement (std sqrt(2 D dt) per axis) to every free molecule;
2. degradation of each free molecule with probability 1 - exp(-k_d dt);
3. for displacements ending inside the receiver, binding with probability
   k_f dt / (4 pi rho); a bound molecule sits where the displacement segment
   first meets the sphere, a rejected one returns to its previous position;
4. unbinding of each bound molecule with probability 1 - exp(-k_b dt); the
   released molecule is placed at a radius drawn from the normalized
   overlap density and a uniformly random direction.

rho is the r^2-weighted integral of the overlap probability (see
:func:`compute_rho`).

Random numbers: trial ``i`` draws from a Philox stream seeded by
``SeedSequence(master_seed, spawn_key=(i,))``. Within a step the draws are,
in order: 3 normals per free molecule; one uniform per free molecule if
k_d > 0; one uniform per overlapping molecule if k_f > 0; one uniform per
bound molecule if k_b > 0; then, for the unbinding molecules, one uniform
for the radius and two for the direction. Per-molecule draws follow the
order of the free and bound position arrays. Newly bound molecules are
appended to the bound array before step 4, so they may unbind in the same
step. Results are therefore identical for any number of workers.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InvariantBreach, QuadratureError
from .params import ChannelParams
from .series import SignalSeries

logger = logging.getLogger(__name__)

AUDIT_EVERY = 64
SAMPLER_POINTS = 4096
SUPPORT_SIGMAS = 10.0


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    trials: int = 1
    master_seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError("dt must be a positive finite number")
        if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            raise DomainError("horizon must be >= dt")
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError("trials must be a positive integer")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise DomainError("record_every must be a positive integer")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise DomainError("master_seed must fit in 64 bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def check_step_size(params: ChannelParams, config: SimConfig) -> None:
    """Warn when k_d dt or k_b dt exceeds 0.1; raise when either exceeds 1."""
    for name, rate in (("k_d", params.k_d), ("k_b", params.k_b)):
        product = rate * config.dt
        if product > 1.0:
            raise DomainError(f"{name}*dt = {product:.3g} > 1; reduce dt")
        if product > 0.1:
            warnings.warn(f"{name}*dt = {product:.3g} > 0.1; expect step-size bias", stacklevel=2)


def _sigma(dt, params):
    return math.sqrt(4.0 * params.D_A * dt)


def _overlap(r, a, sigma):
    r = np.asarray(r, dtype=float)
    plus = (r + a) / sigma
    minus = (r - a) / sigma
    # erf(plus) + erf(-minus) written with erfc to keep the far tail
    p = (sigma / (2.0 * r * math.sqrt(math.pi)) * (np.exp(-plus * plus) - np.exp(-minus * minus))
         + 0.5 * (special.erfc(minus) - special.erfc(plus)))
    return p


def overlap_probability(r, dt: float, params: ChannelParams):
    """Probability that a molecule at radius ``r`` ends inside the receiver
    after one Gaussian displacement over ``dt``; sigma^2 = 4 D dt.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < params.a):
        raise DomainError("r must be >= a")
    if not dt > 0:
        raise DomainError("dt must be > 0")
    p = _overlap(r, params.a, _sigma(dt, params))
    if np.any(p < -1e-15):
        raise DomainError("overlap probability significantly negative")
    p = np.clip(p, 0.0, 1.0)
    return p[()] if p.ndim == 0 else p


def _rho_integral(dt, params):
    a, sigma = params.a, _sigma(dt, params)

    def integrand(x):
        r = a + sigma * x
        return _overlap(r, a, sigma) * r * r

    value, err = integrate.quad(integrand, 0.0, SUPPORT_SIGMAS, epsabs=0.0, epsrel=1e-12, limit=200)
    value *= sigma
    err *= sigma
    # beyond the cutoff the overlap probability is below erfc(10) ~ 2e-45
    r_cut = a + SUPPORT_SIGMAS * sigma
    tail = 0.5 * special.erfc(SUPPORT_SIGMAS) * r_cut * r_cut * sigma
    if not value > 0 or err > 1e-8 * value:
        raise QuadratureError(f"rho quadrature inaccurate: value {value:.3g}, error {err:.3g}")
    return value, tail


def compute_rho(dt: float, params: ChannelParams) -> float:
    """rho = integral over r >= a of overlap_probability(r) * r^2 dr, in m^3."""
    if not dt > 0:
        raise DomainError("dt must be > 0")
    return _rho_integral(dt, params)[0]


def forward_probability(dt: float, params: ChannelParams, rho: float | None = None) -> float:
    """Binding acceptance probability k_f dt / (4 pi rho) for an overlapping move."""
    rho = compute_rho(dt, params) if rho is None else rho
    p = params.k_f * dt / (4.0 * math.pi * rho)
    if p > 1.0:
        raise DomainError(f"forward acceptance probability {p:.3g} > 1; reduce dt")
    return p


@dataclass(frozen=True)
class OverlapSampler:
    """Tabulated inverse CDF of the normalized radial density
    overlap_probability(r) * r^2 / rho on [a, a + 10 sigma].
    """

    a: float
    sigma: float
    rho: float
    tail_bound: float
    radii: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    _inverse: PchipInterpolator = field(repr=False, compare=False)

    @classmethod
    def build(cls, params: ChannelParams, dt: float, points: int = SAMPLER_POINTS) -> "OverlapSampler":
        rho, tail = _rho_integral(dt, params)
        a, sigma = params.a, _sigma(dt, params)
        x = np.concatenate([[0.0], np.geomspace(1e-4, SUPPORT_SIGMAS, points - 1)])
        # 8-point Gauss-Legendre per interval
        nodes, weights = np.polynomial.legendre.leggauss(8)
        lo, hi = x[:-1, None], x[1:, None]
        xs = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        rs = a + sigma * xs
        mass = 0.5 * (hi - lo)[:, 0] * np.sum(weights * _overlap(rs, a, sigma) * rs * rs, axis=1)
        cdf = np.concatenate([[0.0], np.cumsum(mass)]) * sigma
        total = cdf[-1]
        if abs(total - rho) > 1e-8 * rho:
            raise QuadratureError(f"tabulated mass {total:.6g} disagrees with rho {rho:.6g}")
        cdf = cdf / total
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        radii = a + sigma * x[keep]
        cdf = cdf[keep]
        cdf[-1] = 1.0
        inverse = PchipInterpolator(cdf, radii)
        return cls(a, sigma, rho, tail, radii, cdf, inverse)

    def sample(self, u) -> np.ndarray:
        """Radii for uniforms ``u`` in [0, 1)."""
        r = self._inverse(np.asarray(u, dtype=float))
        return np.maximum(r, self.a)

    def density(self, r):
        """Normalized radial density at ``r``."""
        r = np.asarray(r, dtype=float)
        return _overlap(r, self.a, self.sigma) * r * r / self.rho


@dataclass
class Kinetics:
    """Per-step probabilities and tables shared by all trials."""

    a: float
    step_std: float
    p_degrade: float
    p_forward: float
    p_backward: float
    sampler: OverlapSampler | None

    @classmethod
    def build(cls, params: ChannelParams, config: SimConfig) -> "Kinetics":
        check_step_size(params, config)
        dt = config.dt
        sampler = OverlapSampler.build(params, dt) if params.k_f > 0 else None
        p_forward = forward_probability(dt, params, sampler.rho) if sampler else 0.0
        return cls(
            a=params.a,
            step_std=math.sqrt(2.0 * params.D_A * dt),
            p_degrade=-math.expm1(-params.k_d * dt),
            p_forward=p_forward,
            p_backward=-math.expm1(-params.k_b * dt),
            sampler=sampler,
        )


@dataclass
class SimState:
    """Particle population of one trial.

    Free and bound molecules live in separate position arrays; degraded
    molecules are dropped and only counted.
    """

    free: np.ndarray
    bound: np.ndarray
    n_degraded: int
    n_total: int
    step: int = 0

    @classmethod
    def released(cls, n: int, r0: float) -> "SimState":
        free = np.zeros((n, 3))
        free[:, 2] = r0
        return cls(free, np.empty((0, 3)), 0, n)

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def n_bound(self) -> int:
        return len(self.bound)

    def check_conservation(self):
        if self.n_free + self.n_bound + self.n_degraded != self.n_total:
            raise InvariantBreach(
                f"step {self.step}: free {self.n_free} + bound {self.n_bound} "
                f"+ degraded {self.n_degraded} != {self.n_total}")

    def audit(self, a: float):
        """Check the geometric invariants of free and bound molecules."""
        r_free = np.sqrt(np.einsum("ij,ij->i", self.free, self.free))
        if np.any(r_free < a * (1.0 - 1e-12)):
            raise InvariantBreach(f"step {self.step}: free molecule inside the receiver")
        r_bound = np.sqrt(np.einsum("ij,ij->i", self.bound, self.bound))
        if np.any(np.abs(r_bound - a) > 1e-12 * a):
            raise InvariantBreach(f"step {self.step}: bound molecule off the surface")


def _entry_points(p0, p1, a):
    """First intersection of segments p0 -> p1 (outside -> inside) with the sphere."""
    d = p1 - p0
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", p0, d)
    C = np.einsum("ij,ij->i", p0, p0) - a * a
    disc = B * B - A * C
    root = np.sqrt(np.maximum(disc, 0.0))
    q = root - B
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(q > 0, C / q, 1.0)
    tau = np.clip(tau, 0.0, 1.0)
    # tangent within round-off: use the endpoint itself
    tau = np.where(disc < 0, 1.0, tau)
    hit = p0 + tau[:, None] * d
    norm = np.sqrt(np.einsum("ij,ij->i", hit, hit))
    return hit * (a / norm)[:, None]


def _random_directions(u):
    cos_t = 2.0 * u[:, 0] - 1.0
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u[:, 1]
    return np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])


def step_trial(state: SimState, params: ChannelParams, config: SimConfig, rng: np.random.Generator,
               kinetics: Kinetics | None = None) -> SimState:
    """Advance one trial by one time step in place and return it."""
    kin = kinetics or Kinetics.build(params, config)
    a = kin.a

    old = state.free
    new = old + rng.standard_normal(old.shape) * kin.step_std

    if kin.p_degrade > 0 and len(old):
        survive = rng.random(len(old)) > kin.p_degrade
        if not survive.all():
            state.n_degraded += len(old) - int(np.count_nonzero(survive))
            old, new = old[survive], new[survive]

    inside = np.einsum("ij,ij->i", new, new) < a * a
    newly_bound = None
    if inside.any():
        hits = np.flatnonzero(inside)
        if kin.p_forward > 0:
            accept = rng.random(hits.size) <= kin.p_forward
        else:
            accept = np.zeros(hits.size, dtype=bool)
        rejected = hits[~accept]
        new[rejected] = old[rejected]
        if accept.any():
            binding = hits[accept]
            newly_bound = _entry_points(old[binding], new[binding], a)
            keep = np.ones(len(new), dtype=bool)
            keep[binding] = False
            new = new[keep]
    state.free = new
    if newly_bound is not None:
        state.bound = np.concatenate([state.bound, newly_bound])

    if kin.p_backward > 0 and len(state.bound):
        release = rng.random(len(state.bound)) <= kin.p_backward
        if release.any():
            n_rel = int(np.count_nonzero(release))
            u = rng.random((n_rel, 3))
            radius = kin.sampler.sample(u[:, 0])
            placed = radius[:, None] * _random_directions(u[:, 1:])
            state.bound = state.bound[~release]
            state.free = np.concatenate([state.free, placed])

    state.step += 1
    state.check_conservation()
    if state.step % AUDIT_EVERY == 0:
        state.audit(a)
    return state


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for trial ``trial``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(seq))


def default_record_steps(config: SimConfig) -> np.ndarray:
    return np.arange(config.record_every, config.n_steps + 1, config.record_every)


def run_trial(params, config, trial, record_steps, kinetics=None) -> np.ndarray:
    """Bound-molecule counts of one trial at each step in ``record_steps``."""
    kin = kinetics or Kinetics.build(params, config)
    rng = trial_rng(config.master_seed, trial)
    n = int(round(params.N_A))
    state = SimState.released(n, params.r0)
    counts = np.zeros(len(record_steps), dtype=np.int64)
    j = 0
    last = int(record_steps[-1]) if len(record_steps) else 0
    while state.step < last:
        step_trial(state, params, config, rng, kin)
        if state.step == record_steps[j]:
            counts[j] = state.n_bound
            j += 1
    state.audit(params.a)
    return counts


def _run_block(args):
    params, config, trials, record_steps, kin = args
    return np.stack([run_trial(params, config, i, record_steps, kin) for i in trials])


def run_ensemble(params: ChannelParams, config: SimConfig, record_steps=None,
                 workers: int = 1) -> SignalSeries:
    """Mean and standard error of the bound count over ``config.trials`` trials.

    ``record_steps`` are 1-based step indices (default: every
    ``record_every`` steps). Trials may run in ``workers`` processes; the
    reduction is always taken in trial order, so the output does not depend
    on ``workers``.
    """
    steps = default_record_steps(config) if record_steps is None else np.asarray(record_steps, dtype=np.int64)
    if steps.size == 0 or steps[0] < 1 or np.any(np.diff(steps) <= 0) or steps[-1] > config.n_steps:
        raise DomainError("record_steps must be increasing step indices within the horizon")
    kin = Kinetics.build(params, config)
    trials = list(range(config.trials))
    workers = max(1, min(int(workers), config.trials))
    if workers == 1:
        counts = _run_block((params, config, trials, steps, kin))
    else:
        blocks = [b.tolist() for b in np.array_split(np.array(trials), workers) if b.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [(params, config, b, steps, kin) for b in blocks]))
        counts = np.concatenate(parts, axis=0)
    mean = counts.mean(axis=0)
    if config.trials > 1:
        stderr = counts.std(axis=0, ddof=1) / math.sqrt(config.trials)
    else:
        stderr = np.zeros_like(mean)
    meta = {
        "source": "simulation",
        "trials": config.trials,
        "master_seed": config.master_seed,
        "dt": config.dt,
        "steps_checked": int(config.trials * steps[-1]),
        "p_forward": kin.p_forward,
        "rho": kin.sampler.rho if kin.sampler else None,
    }
    return SignalSeries(steps * config.dt, mean, stderr, "count", meta)
