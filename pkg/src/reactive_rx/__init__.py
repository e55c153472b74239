"""Reactive-receiver diffusive molecular communication channel.

Closed-form impulse response, a Laplace-domain numerical oracle and a
Brownian particle simulator, driven by a small experiment harness.
"""

__version__ = "0.1.0"

from .params import ChannelParams, baseline, derived_kD, validate  # noqa: E402
from .series import SignalSeries  # noqa: E402

__all__ = ["ChannelParams", "SignalSeries", "baseline", "derived_kD", "validate", "__version__"]
