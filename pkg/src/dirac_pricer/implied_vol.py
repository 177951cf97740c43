"""Lognormal forward-spread market model for CDS options and the smile table.

The quote scale is the model's own: forward spread = protection PV / risky
annuity PV of the forward CDS, annuity = the premium-leg value per unit
spread.  No external quotes enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .curves import PiecewiseFlatCurve
from .instruments import CDSContract, cds_swaption, forward_cds_quote
from .ou_state import StateEngine

_PRICE_TOL = 1e-12  # relative to annuity * forward
_EPS = 2.220446049250313e-16  # float64 machine epsilon


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class MarketModelQuote:
    forward: float
    strike: float
    annuity: float
    expiry: float
    sigma_implied: float

    def __post_init__(self) -> None:
        if min(self.forward, self.strike, self.annuity, self.expiry) <= 0.0:
            raise ValueError("forward, strike, annuity and expiry must be positive")
        if self.sigma_implied < 0.0:
            raise ValueError("implied volatility must be >= 0")


@dataclass(frozen=True)
class SmileRow:
    strike: float
    forward: float
    price: float
    implied_vol: float  # nan when flagged no-solution
    flag: str


def black_payer(forward: float, strike: float, sigma: float, expiry: float, annuity: float) -> float:
    """annuity * (F N(d1) - K N(d2)); sigma == 0 collapses to intrinsic."""
    if forward <= 0.0 or strike <= 0.0:
        raise ValueError("forward and strike must be positive")
    if annuity <= 0.0 or expiry <= 0.0:
        raise ValueError("annuity and expiry must be positive")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return annuity * max(forward - strike, 0.0)
    total_sd = sigma * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * total_sd * total_sd) / total_sd
    d2 = d1 - total_sd
    return annuity * (forward * _norm_cdf(d1) - strike * _norm_cdf(d2))


def implied_vol(price: float, forward: float, strike: float, expiry: float, annuity: float) -> float:
    """Invert black_payer on a bracket; price must sit in [intrinsic, annuity*F)."""
    intrinsic = annuity * max(forward - strike, 0.0)
    upper = annuity * forward
    tol = _PRICE_TOL * upper
    if price < intrinsic - tol:
        raise ValueError(f"price {price} below intrinsic {intrinsic}: no implied volatility")
    if price >= upper - tol:
        raise ValueError(f"price {price} at or above the forward bound {upper}: no solution")
    if intrinsic > 0.0:
        # in the money the intrinsic value itself carries rounding noise of a
        # few ulps; gaps inside that band are indistinguishable from zero vol
        if price <= intrinsic + 8.0 * _EPS * upper:
            return 0.0
    elif price <= 0.0:
        # out of the money any strictly positive price is meaningful, however
        # tiny: it is inverted exactly rather than clamped
        return 0.0

    def gap(sigma: float) -> float:
        return black_payer(forward, strike, sigma, expiry, annuity) - price

    hi = 0.5
    while gap(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:  # pragma: no cover - bound check above prevents this
            raise ValueError("failed to bracket the implied volatility")
    root = brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    if abs(gap(root)) > tol:  # pragma: no cover - brentq at these tolerances converges
        raise ArithmeticError("implied volatility root did not meet the price tolerance")
    return float(root)


def smile(
    engine: StateEngine,
    contract: CDSContract,
    exercise: float,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    strike_multiples: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0),
    t: float = 0.0,
) -> list[SmileRow]:
    """Model prices and implied vols on a strike grid around the forward.

    Rows come back strike-ascending; strikes the market model cannot match
    are flagged "no-solution" (vol = nan) rather than aborting the table.
    """
    forward, _, annuity_pv = forward_cds_quote(engine, contract, exercise, discount, zeta, t)
    multiples = sorted(float(m) for m in strike_multiples)
    if multiples and multiples[0] <= 0.0:
        raise ValueError("strike multiples must be positive")
    strikes = [m * forward for m in multiples]
    prices = cds_swaption(engine, contract, exercise, discount, zeta, t, strikes=strikes)
    expiry = exercise - t
    rows = []
    for strike, price in zip(strikes, prices):
        try:
            vol = implied_vol(float(price), forward, strike, expiry, annuity_pv)
            flag = "ok"
        except (ValueError, ArithmeticError):
            vol = float("nan")
            flag = "no-solution"
        rows.append(SmileRow(strike=strike, forward=forward, price=float(price), implied_vol=vol, flag=flag))
    return rows
