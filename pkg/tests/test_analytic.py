import math

import pytest

from dirac_pricer import (
    FixedSeverityDirac,
    MixedShortRateSpec,
    PiecewiseFlatCurve,
    ScheduledEvents,
    defaultable_zcb_fixed,
    defaultable_zcb_mixed,
    discount_factor,
    scheduled_survival,
    semi_defaultable_zcb_fixed,
    semi_defaultable_zcb_mixed,
    tradeoff_intensity,
)

ZERO = PiecewiseFlatCurve.flat(0.0)
R2 = PiecewiseFlatCurve.flat(0.02)


def test_zero_severity_is_riskless():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(3.0), 0.0)
    assert defaultable_zcb_fixed(spec, R2, 0.0, 4.0) == pytest.approx(
        discount_factor(R2, 0.0, 4.0), rel=1e-15
    )


def test_log_two_severity_example():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), math.log(2.0))
    assert defaultable_zcb_fixed(spec, ZERO, 0.0, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_huge_severity_every_spike_kills():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), 500.0)
    assert defaultable_zcb_fixed(spec, ZERO, 0.0, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-13)


def test_semi_defaultable_no_default_window():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), 0.3)
    assert semi_defaultable_zcb_fixed(spec, R2, 0.0, 1.0, 0.0) == pytest.approx(
        discount_factor(R2, 0.0, 1.0), rel=1e-15
    )


def test_semi_defaultable_degenerates_to_defaultable():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), 0.3)
    assert semi_defaultable_zcb_fixed(spec, R2, 0.0, 3.0, 3.0) == defaultable_zcb_fixed(
        spec, R2, 0.0, 3.0
    )


def test_semi_defaultable_worked_example():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), 0.1)
    expected = math.exp(-0.02) * math.exp((math.exp(-0.1) - 1.0) * 1.8)
    assert semi_defaultable_zcb_fixed(spec, R2, 0.0, 1.0, 0.9) == pytest.approx(expected, rel=1e-14)


def _mixed(z0, z1, z2, s0=0.1, r=0.02):
    one = PiecewiseFlatCurve.flat
    return MixedShortRateSpec(
        continuous_discount=one(r),
        rate_spikes=FixedSeverityDirac(one(z1), s0),
        hazard_spikes=FixedSeverityDirac(one(z2), s0),
        common_intensity=one(z0),
        common_severity_rate=s0,
        common_severity_hazard=s0,
    )


def test_mixed_all_intensities_zero_is_continuous_bond():
    spec = _mixed(0.0, 0.0, 0.0)
    assert defaultable_zcb_mixed(spec, 0.0, 1.0) == pytest.approx(
        discount_factor(R2, 0.0, 1.0), rel=1e-15
    )


def test_mixed_worked_example_common_counts_twice():
    spec = _mixed(1.0, 1.0, 1.0, s0=0.1)
    expected = math.exp(-0.02) * math.exp(4.0 * (math.exp(-0.1) - 1.0))
    assert defaultable_zcb_mixed(spec, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)


def test_mixed_no_common_factorizes():
    spec = _mixed(0.0, 1.5, 0.7, s0=0.2)
    lone_rate = FixedSeverityDirac(PiecewiseFlatCurve.flat(1.5), 0.2)
    lone_hazard = FixedSeverityDirac(PiecewiseFlatCurve.flat(0.7), 0.2)
    product = (
        defaultable_zcb_fixed(lone_rate, R2, 0.0, 2.0)
        * defaultable_zcb_fixed(lone_hazard, ZERO, 0.0, 2.0)
    )
    assert defaultable_zcb_mixed(spec, 0.0, 2.0) == pytest.approx(product, rel=1e-13)


def test_mixed_semi_splits_legs_by_maturity():
    spec = _mixed(1.0, 2.0, 0.5, s0=0.1)
    got = semi_defaultable_zcb_mixed(spec, 0.0, 1.0, 2.0)
    factor = math.exp(-0.1) - 1.0
    expected = math.exp(-0.02) * math.exp(factor * (1.0 + 2.0) + factor * (2.0 + 0.5 * 2.0))
    assert got == pytest.approx(expected, rel=1e-13)


def test_scheduled_survival_examples():
    events = ScheduledEvents((0.5, 1.5), (0.2, 0.3))
    assert scheduled_survival(events, 2.0, 3.0) == 1.0
    assert scheduled_survival(events, 0.0, 1.0) == pytest.approx(math.exp(-0.2), rel=1e-15)
    assert scheduled_survival(events, 0.0, 2.0) == pytest.approx(math.exp(-0.5), rel=1e-15)
    # window boundaries: exclusive at the start, inclusive at the end
    assert scheduled_survival(events, 0.5, 1.5) == pytest.approx(math.exp(-0.3), rel=1e-15)


def test_scheduled_composes_with_stochastic_spikes():
    events = ScheduledEvents((0.25,), (0.1,))
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(2.0), 0.3)
    combined = scheduled_survival(events, 0.0, 1.0) * defaultable_zcb_fixed(spec, R2, 0.0, 1.0)
    assert combined < defaultable_zcb_fixed(spec, R2, 0.0, 1.0)


@pytest.mark.parametrize("lam", [1.0 / 30.0, 1.0 / 15.0])
@pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("maturity", [0.5, 1.0, 5.0, 10.0])
def test_tradeoff_invariance(lam, s, maturity):
    nu = tradeoff_intensity(lam, s)
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(nu), s)
    target = math.exp(-lam * maturity) * discount_factor(R2, 0.0, maturity)
    assert abs(defaultable_zcb_fixed(spec, R2, 0.0, maturity) - target) <= 1e-12


def test_tradeoff_examples_and_errors():
    lam = 0.02 / 0.6  # 200 bps spread at 60% loss-given-default
    assert tradeoff_intensity(lam, 0.5) == pytest.approx(lam / (1.0 - math.exp(-0.5)), rel=1e-15)
    assert tradeoff_intensity(0.0, 0.7) == 0.0
    assert tradeoff_intensity(lam, 60.0) == pytest.approx(lam, rel=1e-12)
    with pytest.raises(ValueError, match="severity"):
        tradeoff_intensity(lam, 0.0)
    with pytest.raises(ValueError):
        tradeoff_intensity(-0.1, 0.5)


def test_price_monotonicity():
    base = dict(zeta=2.0, s=0.4, maturity=3.0)
    price = lambda zeta, s, maturity: defaultable_zcb_fixed(
        FixedSeverityDirac(PiecewiseFlatCurve.flat(zeta), s), R2, 0.0, maturity
    )
    p0 = price(base["zeta"], base["s"], base["maturity"])
    assert price(base["zeta"], 0.6, base["maturity"]) < p0
    assert price(3.0, base["s"], base["maturity"]) < p0
    assert price(base["zeta"], base["s"], 4.0) < p0
    assert 0.0 < p0 <= discount_factor(R2, 0.0, base["maturity"])


def test_ordering_and_negative_params_rejected():
    spec = FixedSeverityDirac(PiecewiseFlatCurve.flat(1.0), 0.1)
    with pytest.raises(ValueError):
        defaultable_zcb_fixed(spec, R2, 2.0, 1.0)
    with pytest.raises(ValueError):
        FixedSeverityDirac(PiecewiseFlatCurve.flat(-1.0), 0.1)
    with pytest.raises(ValueError):
        FixedSeverityDirac(PiecewiseFlatCurve.flat(1.0), -0.1)
    with pytest.raises(ValueError):
        ScheduledEvents((1.0, 0.5), (0.1, 0.1))
