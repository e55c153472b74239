"""Physical and chemical parameters of the transmitter/receiver system.

All quantities are strict SI: meters, seconds, m^3/s for the forward
reaction constant (volume per molecule per second).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import DomainError, GeometryError, NonFiniteError, ParameterError

FIELDS = ("a", "r0", "D_A", "k_f", "k_b", "k_d", "N_A")


def _violations(a, r0, D_A, k_f, k_b, k_d, N_A):
    found = []
    values = dict(a=a, r0=r0, D_A=D_A, k_f=k_f, k_b=k_b, k_d=k_d, N_A=N_A)
    finite = {}
    for name, value in values.items():
        try:
            value = float(value)
        except (TypeError, ValueError):
            found.append(DomainError(f"{name} is not a number: {value!r}"))
            continue
        if not math.isfinite(value):
            found.append(NonFiniteError(f"{name} must be finite, got {value}"))
            continue
        finite[name] = value

    for name in ("a", "D_A"):
        if name in finite and finite[name] <= 0:
            found.append(DomainError(f"{name} must be > 0, got {finite[name]}"))
    for name in ("k_f", "k_b", "k_d", "N_A"):
        if name in finite and finite[name] < 0:
            found.append(DomainError(f"{name} must be >= 0, got {finite[name]}"))
    if "a" in finite and "r0" in finite and not finite["r0"] > finite["a"]:
        found.append(GeometryError(
            f"transmitter must lie outside the receiver: r0={finite['r0']} <= a={finite['a']}"))
    return found


@dataclass(frozen=True)
class ChannelParams:
    """Receiver radius ``a``, transmitter distance ``r0``, diffusion
    coefficient ``D_A``, reaction constants ``k_f``, ``k_b``, ``k_d`` and the
    number of released molecules ``N_A``.

    Construction validates every invariant; an invalid instance cannot exist.
    """

    a: float
    r0: float
    D_A: float
    k_f: float
    k_b: float = 0.0
    k_d: float = 0.0
    N_A: float = 1.0

    def __post_init__(self):
        found = _violations(self.a, self.r0, self.D_A, self.k_f, self.k_b, self.k_d, self.N_A)
        if found:
            raise _aggregate(found)
        for name in FIELDS:
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def k_D(self) -> float:
        return derived_kD(self)

    def replace(self, **changes) -> "ChannelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in FIELDS}


def _aggregate(found):
    messages = [str(err) for err in found]
    kinds = {type(err) for err in found}
    cls = kinds.pop() if len(kinds) == 1 else ParameterError
    return cls("; ".join(messages), violations=messages)


def validate(**fields) -> ChannelParams:
    """Build a :class:`ChannelParams`, reporting all violations at once.

    Raises the specific error class (``GeometryError``, ``DomainError``,
    ``NonFiniteError``) when every violation is of one kind, otherwise a
    plain ``ParameterError``. The exception's ``violations`` lists them all.
    """
    unknown = set(fields) - set(FIELDS)
    if unknown:
        raise ParameterError(f"unknown parameter(s): {sorted(unknown)}")
    return ChannelParams(**fields)


def derived_kD(params: ChannelParams) -> float:
    """Diffusion-limited rate constant 4*pi*a*D_A in m^3/s."""
    return 4.0 * math.pi * params.a * params.D_A


def baseline(**overrides) -> ChannelParams:
    """Geometry and chemistry used for the reference figures.

    a = 0.5 um, r0 = 1 um, D_A = 5e-9 m^2/s, k_f = 3.14e-14 m^3/s,
    N_A = 5000; k_b and k_d default to zero.
    """
    values = dict(a=0.5e-6, r0=1.0e-6, D_A=5e-9, k_f=3.14e-14, k_b=0.0, k_d=0.0, N_A=5000)
    values.update(overrides)
    return validate(**values)
