"""Deterministic positive time curves used for debt and exposure profiles."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ValidationError


@dataclass(frozen=True)
class TimeCurve:
    """A positive curve of time: constant, exponential, or interpolated knots."""

    kind: str
    level: float = 1.0
    rate: float = 0.0
    t0: float = 0.0
    knots_t: tuple = ()
    knots_v: tuple = ()

    def __post_init__(self):
        if self.kind in ("constant", "exponential"):
            if self.level <= 0.0:
                raise ValidationError("curve level must be > 0")
        elif self.kind == "knots":
            ts = np.asarray(self.knots_t, dtype=float)
            vs = np.asarray(self.knots_v, dtype=float)
            if ts.size != vs.size or ts.size < 2:
                raise ValidationError("need at least two (t, value) knots")
            if np.any(np.diff(ts) <= 0.0) or np.any(vs <= 0.0):
                raise ValidationError("knots must be increasing in t with values > 0")
            object.__setattr__(self, "_interp", PchipInterpolator(ts, vs))
        else:
            raise ValidationError(f"unknown curve kind {self.kind!r}")

    @classmethod
    def constant(cls, level):
        return cls(kind="constant", level=level)

    @classmethod
    def exponential(cls, level, rate, t0=0.0):
        return cls(kind="exponential", level=level, rate=rate, t0=t0)

    @classmethod
    def from_knots(cls, ts, vs):
        return cls(
            kind="knots",
            knots_t=tuple(float(t) for t in ts),
            knots_v=tuple(float(v) for v in vs),
        )

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full_like(t, self.level)
        elif self.kind == "exponential":
            out = self.level * np.exp(self.rate * (t - self.t0))
        else:
            lo, hi = self.knots_t[0], self.knots_t[-1]
            out = np.maximum(self._interp(np.clip(t, lo, hi)), 1e-300)
        return float(out) if out.ndim == 0 else out
