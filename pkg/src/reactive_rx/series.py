"""Time series container shared by the analytic, oracle and simulation paths."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

CSV_HEADER = "t_s,value,stderr"


@dataclass
class SignalSeries:
    """Samples of a received signal on a time grid.

    ``kind`` is ``"probability"`` (values in [0, 1]) or ``"count"`` (values
    in [0, N_A]). ``stderr`` is None for deterministic series.
    """

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    kind: str = "count"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.values.shape:
                raise DomainError("stderr must match values in shape")
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if self.times.size and (self.times[0] <= 0 or np.any(np.diff(self.times) <= 0)):
            raise DomainError("times must be positive and strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("series values must be finite")

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, SignalSeries):
            return NotImplemented
        same_err = (self.stderr is None and other.stderr is None) or (
            self.stderr is not None and other.stderr is not None
            and np.array_equal(self.stderr, other.stderr))
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values) and same_err)

    def scaled(self, factor: float) -> "SignalSeries":
        stderr = None if self.stderr is None else self.stderr * abs(factor)
        return SignalSeries(self.times, self.values * factor, stderr, self.kind, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(CSV_HEADER + "\n")
        for i, (t, v) in enumerate(zip(self.times, self.values)):
            err = "" if self.stderr is None else format(self.stderr[i], ".17g")
            buf.write(f"{t:.17g},{v:.17g},{err}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, kind: str = "count") -> "SignalSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != CSV_HEADER:
            raise DomainError(f"expected CSV header {CSV_HEADER!r}")
        times, values, errs = [], [], []
        for ln in lines[1:]:
            t, v, e = ln.split(",")
            times.append(float(t))
            values.append(float(v))
            errs.append(e.strip())
        stderr = None
        if errs and all(errs):
            stderr = np.array([float(e) for e in errs])
        return cls(np.array(times), np.array(values), stderr, kind)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())
        return path

    @classmethod
    def read_csv(cls, path, kind: str = "count") -> "SignalSeries":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"), kind)
