"""Closed-form bond prices for spike hazards with deterministic severity.

Per-spike survival here follows the exponential convention: one spike of
severity ``s`` multiplies integrated survival by ``exp(-s)``.  The state-space
engine in :mod:`dirac_pricer.ou_state` exposes the alternative ``1 - s``
convention; the two are deliberately kept distinct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .curves import PiecewiseFlatCurve, discount_factor, integrate, require_nonnegative


@dataclass(frozen=True)
class FixedSeverityDirac:
    """Spike process with deterministic intensity and one fixed severity per spike."""

    zeta: PiecewiseFlatCurve
    severity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "severity", float(self.severity))
        if self.severity < 0.0:
            raise ValueError(f"severity must be >= 0, got {self.severity}")
        require_nonnegative(self.zeta)


@dataclass(frozen=True)
class ScheduledEvents:
    """Spikes at known calendar times with known severities."""

    times: tuple[float, ...]
    severities: tuple[float, ...]

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.times)
        ss = tuple(float(s) for s in self.severities)
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "severities", ss)
        if len(ts) != len(ss):
            raise ValueError("times and severities must have the same length")
        for a, b in zip(ts, ts[1:]):
            if not b > a:
                raise ValueError("scheduled event times must be strictly ascending")
        for s in ss:
            if s < 0.0:
                raise ValueError(f"scheduled severities must be >= 0, got {s}")


@dataclass(frozen=True)
class MixedShortRateSpec:
    """Short rate = continuous part + spikes; hazard = spikes; one shared spike stream.

    The shared stream (``common_intensity``) delivers severity
    ``common_severity_rate`` to the discounting leg and ``common_severity_hazard``
    to the default leg at every common spike.  Distinct streams never spike
    together, so each contributes one exponential factor.
    """

    continuous_discount: PiecewiseFlatCurve
    rate_spikes: FixedSeverityDirac
    hazard_spikes: FixedSeverityDirac
    common_intensity: PiecewiseFlatCurve
    common_severity_rate: float
    common_severity_hazard: float

    def __post_init__(self) -> None:
        require_nonnegative(self.common_intensity, "common intensity")
        if self.common_severity_rate < 0.0 or self.common_severity_hazard < 0.0:
            raise ValueError("common severities must be >= 0")


def defaultable_zcb_fixed(
    spec: FixedSeverityDirac, discount: PiecewiseFlatCurve, t: float, maturity: float
) -> float:
    """DF(t,T) * exp((e^{-s} - 1) * cumulative_intensity(t,T))."""
    return semi_defaultable_zcb_fixed(spec, discount, t, maturity, maturity)


def semi_defaultable_zcb_fixed(
    spec: FixedSeverityDirac,
    discount: PiecewiseFlatCurve,
    t: float,
    maturity: float,
    exposure_end: float,
) -> float:
    """Discounting runs to ``maturity``; default exposure runs to ``exposure_end``."""
    if maturity < t or exposure_end < t:
        raise ValueError("maturity and exposure end must not precede valuation")
    lam = integrate(spec.zeta, t, exposure_end)
    return discount_factor(discount, t, maturity) * math.exp(math.expm1(-spec.severity) * lam)


def defaultable_zcb_mixed(spec: MixedShortRateSpec, t: float, maturity: float) -> float:
    return semi_defaultable_zcb_mixed(spec, t, maturity, maturity)


def semi_defaultable_zcb_mixed(
    spec: MixedShortRateSpec, t: float, maturity: float, exposure_end: float
) -> float:
    """Product of the continuous bond and one exponential factor per spike stream.

    Rate-leg streams integrate to ``maturity``, hazard-leg streams to
    ``exposure_end``; the shared stream contributes once on each leg (with its
    per-leg severity), which doubles up in the defaultable case.
    """
    if maturity < t or exposure_end < t:
        raise ValueError("maturity and exposure end must not precede valuation")
    exponent = (
        math.expm1(-spec.common_severity_rate) * integrate(spec.common_intensity, t, maturity)
        + math.expm1(-spec.rate_spikes.severity) * integrate(spec.rate_spikes.zeta, t, maturity)
        + math.expm1(-spec.common_severity_hazard)
        * integrate(spec.common_intensity, t, exposure_end)
        + math.expm1(-spec.hazard_spikes.severity)
        * integrate(spec.hazard_spikes.zeta, t, exposure_end)
    )
    return discount_factor(spec.continuous_discount, t, maturity) * math.exp(exponent)


def scheduled_survival(events: ScheduledEvents, t: float, horizon: float) -> float:
    """Survival factor from known events in (t, horizon]: product of e^{-s_j}.

    Composes multiplicatively with the stochastic-spike bond prices for a
    hazard mixing scheduled and random spikes.
    """
    if horizon < t:
        raise ValueError("horizon precedes window start")
    total = math.fsum(s for time, s in zip(events.times, events.severities) if t < time <= horizon)
    return math.exp(-total)


def tradeoff_intensity(flat_hazard: float, severity: float) -> float:
    """Spike intensity reproducing a flat hazard rate at the given severity.

    Inverts hazard = intensity * (1 - e^{-s}); severity 0 would need infinite
    intensity.
    """
    if severity <= 0.0:
        raise ValueError("severity must be > 0: zero severity needs infinite intensity")
    if flat_hazard < 0.0:
        raise ValueError(f"flat hazard must be >= 0, got {flat_hazard}")
    return flat_hazard / -math.expm1(-severity)
