"""Deterministic piecewise-flat time curves shared by every pricing module.

Conventions used throughout the package:

- Time is a year fraction as a float; a day is exactly 1/365.
- A curve is right-continuous and piecewise flat: ``values[i]`` applies on
  ``[breakpoints[i], breakpoints[i+1])``.  Beyond the last breakpoint (and
  before the first, if it is positive) the curve extrapolates flat.
- Discount rates are continuously compounded per year; spike intensities are
  expected events per year.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class PiecewiseFlatCurve:
    """Piecewise-flat function of time with flat extrapolation."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if not bps:
            raise ValueError("curve needs at least one breakpoint")
        if len(bps) != len(vals):
            raise ValueError("breakpoints and values must have the same length")
        if bps[0] < 0.0:
            raise ValueError(f"first breakpoint must be >= 0, got {bps[0]}")
        for a, b in zip(bps, bps[1:]):
            if not b > a:
                raise ValueError("breakpoints must be strictly ascending")
        for v in vals:
            if not math.isfinite(v):
                raise ValueError("curve values must be finite")

    @classmethod
    def flat(cls, value: float) -> "PiecewiseFlatCurve":
        return cls((0.0,), (float(value),))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "PiecewiseFlatCurve":
        pts = list(pairs)
        return cls(tuple(t for t, _ in pts), tuple(v for _, v in pts))

    @property
    def min_value(self) -> float:
        return min(self.values)

    def value_at(self, t: float) -> float:
        idx = bisect_right(self.breakpoints, t) - 1
        if idx < 0:
            return self.values[0]
        return self.values[idx]


def _check_window(t0: float, t1: float) -> None:
    if t0 < 0.0:
        raise ValueError(f"window start must be >= 0, got {t0}")
    if t1 < t0:
        raise ValueError(f"reversed time window: end {t1} before start {t0}")


def integrate(curve: PiecewiseFlatCurve, t0: float, t1: float) -> float:
    """Exact integral of the curve over [t0, t1] (piecewise-linear accumulation)."""
    _check_window(t0, t1)
    if t1 == t0:
        return 0.0
    knots = [t0]
    for b in curve.breakpoints:
        if t0 < b < t1:
            knots.append(b)
    knots.append(t1)
    return math.fsum(curve.value_at(a) * (b - a) for a, b in zip(knots, knots[1:]))


def discount_factor(curve: PiecewiseFlatCurve, t0: float, t1: float) -> float:
    """exp(-integral of the rate curve over [t0, t1]); equals 1 when t0 == t1."""
    return math.exp(-integrate(curve, t0, t1))


def require_nonnegative(curve: PiecewiseFlatCurve, name: str = "intensity") -> None:
    """Reject curves with negative values (intensities must be rates >= 0)."""
    if curve.min_value < 0.0:
        raise ValueError(f"{name} curve must be nonnegative, min value {curve.min_value}")
