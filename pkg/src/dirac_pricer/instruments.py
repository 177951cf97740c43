"""Tradable-level pricing: CDS legs and par spread, single-curve IRS, bond
options on the severity state space, and the CDS swaption.

Schedule arithmetic lives on an exact 1/365 day grid: protection is summed
daily, premiums quarterly by default with year fractions taken from the day
grid, accrual-on-default ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curves import PiecewiseFlatCurve, discount_factor, require_nonnegative
from .ou_state import StateEngine, poisson_weighted_apply, propagate_survival
from .curves import integrate

DAY = 1.0 / 365.0

# semi-defaultable bond from today: pricer(maturity, exposure_end) -> price
SemiBondPricer = Callable[[float, float], float]


def _to_day_count(t: float, name: str) -> int:
    d = round(t * 365.0)
    if abs(t * 365.0 - d) > 1e-6:
        raise ValueError(f"{name} {t} is not on the 1/365 day grid")
    return int(d)


@dataclass(frozen=True)
class CDSContract:
    """Protection over [start, end] with a premium schedule on the day grid.

    ``premium_rate`` may be None when only the par spread is wanted.  Premium
    dates fall on the day grid at ``365/frequency``-day spacing (half-up
    rounding) and must land exactly on the protection end.
    """

    protection_start: float
    protection_end: float
    lgd: float
    premium_rate: float | None = None
    premium_frequency: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.protection_start < self.protection_end:
            raise ValueError("need 0 <= protection start < protection end")
        if not 0.0 <= self.lgd <= 1.0:
            raise ValueError(f"lgd must be in [0, 1], got {self.lgd}")
        if self.premium_frequency < 1:
            raise ValueError("premium frequency must be >= 1 per year")
        _to_day_count(self.protection_start, "protection start")
        ndays = self.protection_days
        if self.premium_day_offsets[-1] != ndays:
            raise ValueError("premium schedule must end exactly at protection end")

    @property
    def protection_days(self) -> int:
        return _to_day_count(self.protection_end - self.protection_start, "protection span")

    @property
    def premium_day_offsets(self) -> tuple[int, ...]:
        step = 365.0 / self.premium_frequency
        ndays = _to_day_count(self.protection_end - self.protection_start, "protection span")
        days = []
        k = 1
        while True:
            d = math.floor(step * k + 0.5)
            if d > ndays:
                break
            days.append(d)
            k += 1
        return tuple(days)

    def premium_schedule(self) -> list[tuple[float, float]]:
        """(payment time, year fraction) pairs, year fractions off the day grid."""
        out = []
        prev = 0
        for d in self.premium_day_offsets:
            out.append((self.protection_start + d * DAY, (d - prev) * DAY))
            prev = d
        return out


def cds_legs(contract: CDSContract, pricer: SemiBondPricer) -> tuple[float, float]:
    """(protection value, premium value) from a semi-defaultable bond pricer.

    Protection sums the discounted default probability day by day:
    LGD * sum_i [P(T_i, T_{i-1}) - P(T_i, T_i)].  Premium is R * sum alpha_i *
    P(T_i, T_i).
    """
    if contract.premium_rate is None:
        raise ValueError("contract has no premium rate; use cds_par_spread")
    protection = contract.lgd * _protection_sum(contract, pricer)
    premium = contract.premium_rate * _premium_annuity(contract, pricer)
    return protection, premium


def cds_value(contract: CDSContract, pricer: SemiBondPricer) -> float:
    """Protection leg minus premium leg (long protection)."""
    protection, premium = cds_legs(contract, pricer)
    return protection - premium


def cds_par_spread(contract: CDSContract, pricer: SemiBondPricer) -> float:
    """Premium rate nulling the CDS value: protection / risky annuity."""
    annuity = _premium_annuity(contract, pricer)
    if annuity <= 1e-15:
        raise ValueError("risky annuity is zero: no finite par spread")
    return contract.lgd * _protection_sum(contract, pricer) / annuity


def _protection_sum(contract: CDSContract, pricer: SemiBondPricer) -> float:
    start = contract.protection_start
    terms = []
    for d in range(1, contract.protection_days + 1):
        t_prev = start + (d - 1) * DAY
        t_i = start + d * DAY
        terms.append(pricer(t_i, t_prev) - pricer(t_i, t_i))
    return math.fsum(terms)


def _premium_annuity(contract: CDSContract, pricer: SemiBondPricer) -> float:
    return math.fsum(alpha * pricer(t_i, t_i) for t_i, alpha in contract.premium_schedule())


def fixed_severity_pricer(spec, discount: PiecewiseFlatCurve) -> SemiBondPricer:
    from .analytic import semi_defaultable_zcb_fixed

    return lambda maturity, exposure_end: semi_defaultable_zcb_fixed(
        spec, discount, 0.0, maturity, exposure_end
    )


def ou_pricer(
    engine: StateEngine, discount: PiecewiseFlatCurve, zeta: PiecewiseFlatCurve
) -> SemiBondPricer:
    from .ou_state import semi_defaultable_zcb_ou

    return lambda maturity, exposure_end: semi_defaultable_zcb_ou(
        engine, discount, zeta, 0.0, maturity, exposure_end
    )


def irs_value(
    fixed_rate: float,
    times: tuple[float, ...] | list[float],
    discount: PiecewiseFlatCurve,
    payer: bool = True,
) -> float:
    """Single-curve swap value; times[0] is the start, the rest pay dates.

    Float leg = DF(start) - DF(end); fixed leg = rate * sum alpha_i DF(T_i).
    """
    ts = [float(t) for t in times]
    if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("schedule must be ascending with at least start and one payment")
    float_leg = discount_factor(discount, 0.0, ts[0]) - discount_factor(discount, 0.0, ts[-1])
    fixed_leg = fixed_rate * math.fsum(
        (b - a) * discount_factor(discount, 0.0, b) for a, b in zip(ts, ts[1:])
    )
    value = float_leg - fixed_leg
    return value if payer else -value


def irs_par_rate(times: tuple[float, ...] | list[float], discount: PiecewiseFlatCurve) -> float:
    ts = [float(t) for t in times]
    annuity = math.fsum((b - a) * discount_factor(discount, 0.0, b) for a, b in zip(ts, ts[1:]))
    return (discount_factor(discount, 0.0, ts[0]) - discount_factor(discount, 0.0, ts[-1])) / annuity


@dataclass(frozen=True)
class BondOptionSpec:
    """European option on a (semi-)defaultable zero-coupon bond."""

    strike: float
    exercise: float
    maturity: float
    exposure_end: float | None = None

    def __post_init__(self) -> None:
        if self.strike < 0.0:
            raise ValueError(f"strike must be >= 0, got {self.strike}")
        if not 0.0 < self.exercise < self.maturity:
            raise ValueError("need 0 < exercise < maturity")
        if self.exposure_end is not None and self.exposure_end <= self.exercise:
            raise ValueError("exposure end must lie beyond exercise")

    @property
    def exposure(self) -> float:
        return self.maturity if self.exposure_end is None else self.exposure_end


def bond_option_ou(
    engine: StateEngine,
    spec: BondOptionSpec,
    zeta: PiecewiseFlatCurve,
    discount: PiecewiseFlatCurve,
    kind: str = "call",
    t: float = 0.0,
    tail_tol: float | None = None,
) -> float:
    """Option on the state-space bond, as one joint expectation.

    The state-conditional bond value at exercise is max'd against the strike
    per state; discounting to exercise and the end-state payoff share a single
    expectation over (event count, driver path).
    """
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    if t >= spec.exercise:
        raise ValueError("valuation time must precede exercise")
    require_nonnegative(zeta)
    ones = np.ones(engine.n_states)
    v_end = propagate_survival(engine, ones, zeta, spec.exercise, spec.exposure, tail_tol)
    bond_at_exercise = discount_factor(discount, spec.exercise, spec.maturity) * v_end
    if kind == "call":
        payoff = np.maximum(bond_at_exercise - spec.strike, 0.0)
    else:
        payoff = np.maximum(spec.strike - bond_at_exercise, 0.0)
    outer = propagate_survival(engine, payoff, zeta, t, spec.exercise, tail_tol)
    return discount_factor(discount, t, spec.exercise) * float(engine.initial_weights @ outer)


def forward_cds_leg_vectors(
    engine: StateEngine,
    contract: CDSContract,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    valuation_time: float,
    tail_tol: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """State-conditional (protection, unit-premium annuity) values at valuation.

    Entries are conditional on the driver state at ``valuation_time``; both
    legs discount to that time.  The survival vector is rolled forward one day
    at a time, so the whole daily partition costs one short Poisson sum per
    day.  A volatility switch strictly inside the span is not supported (the
    day recursion needs a single step matrix); in swaption use the switch sits
    at the valuation time.
    """
    if valuation_time > contract.protection_start + 1e-12:
        raise ValueError("valuation after protection start is not supported")
    require_nonnegative(zeta)
    tail = engine.grid.tail_tol if tail_tol is None else tail_tol

    sw = engine.switch_time
    if engine.step_post is None or sw is None or sw >= contract.protection_end - 1e-12:
        matrix = engine.step
    elif sw <= valuation_time + 1e-12:
        matrix = engine.step_post
    else:
        raise ValueError("volatility switch strictly inside the CDS span is not supported")

    lead_days = _to_day_count(contract.protection_start - valuation_time, "lead period")
    total_days = lead_days + contract.protection_days
    alpha_by_day = {
        lead_days + d: alpha
        for d, (_, alpha) in zip(contract.premium_day_offsets, contract.premium_schedule())
    }

    n = engine.n_states
    protection = np.zeros(n)
    annuity = np.zeros(n)
    v_prev = np.ones(n)
    t_prev = valuation_time
    for d in range(1, total_days + 1):
        t_i = valuation_time + d * DAY
        lam_d = integrate(zeta, t_prev, t_i)
        v = poisson_weighted_apply(matrix, lam_d, v_prev, tail)
        df = discount_factor(discount, valuation_time, t_i)
        if d > lead_days:
            protection += df * (v_prev - v)
        alpha = alpha_by_day.get(d)
        if alpha is not None:
            annuity += alpha * df * v
        v_prev = v
        t_prev = t_i
    return contract.lgd * protection, annuity


def cds_swaption(
    engine: StateEngine,
    contract: CDSContract,
    exercise: float,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    t: float = 0.0,
    strikes: list[float] | tuple[float, ...] | None = None,
    tail_tol: float | None = None,
):
    """Payer swaption on a forward CDS, knock-out embedded in survival weights.

    For each event count and reachable end state at exercise, the forward legs
    come from the post-switch conditional survival vectors; the payoff is
    max(protection - R * annuity, 0) per state, pulled back to valuation under
    one expectation whose per-event survival factors carry the knock-out.

    Returns a float for the contract's own rate, or an array when ``strikes``
    is given.
    """
    if not t < exercise:
        raise ValueError("valuation must precede exercise")
    if exercise > contract.protection_start + 1e-12:
        raise ValueError("exercise after protection start (seasoned CDS) is unsupported")
    prot_vec, ann_vec = forward_cds_leg_vectors(
        engine, contract, discount, zeta, exercise, tail_tol
    )
    if strikes is None:
        if contract.premium_rate is None:
            raise ValueError("no strike: contract has no premium rate")
        rates = [contract.premium_rate]
    else:
        rates = [float(r) for r in strikes]
    df = discount_factor(discount, t, exercise)
    prices = []
    for rate in rates:
        payoff = np.maximum(prot_vec - rate * ann_vec, 0.0)
        outer = propagate_survival(engine, payoff, zeta, t, exercise, tail_tol)
        prices.append(df * float(engine.initial_weights @ outer))
    if strikes is None:
        return prices[0]
    return np.array(prices)


def forward_cds_quote(
    engine: StateEngine,
    contract: CDSContract,
    exercise: float,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    t: float = 0.0,
    tail_tol: float | None = None,
) -> tuple[float, float, float]:
    """(forward par spread, protection PV, annuity PV) seen from valuation.

    PVs include survival to exercise; the forward spread is their ratio, the
    scale the market-model quotes run on.
    """
    prot_vec, ann_vec = forward_cds_leg_vectors(
        engine, contract, discount, zeta, exercise, tail_tol
    )
    df = discount_factor(discount, t, exercise)
    h = engine.initial_weights
    prot_pv = df * float(h @ propagate_survival(engine, prot_vec, zeta, t, exercise, tail_tol))
    ann_pv = df * float(h @ propagate_survival(engine, ann_vec, zeta, t, exercise, tail_tol))
    if ann_pv <= 1e-300:
        raise ValueError("forward annuity PV is zero: no finite forward spread")
    return prot_pv / ann_pv, prot_pv, ann_pv
