import math

import numpy as np
import pytest
from scipy.stats import poisson

from dirac_pricer import (
    BandTransform,
    GridSpec,
    OUParams,
    PiecewiseFlatCurve,
    StateEngine,
    band_transform,
    build_engine,
    conditional_survival_vector,
    defaultable_zcb_ou,
    discount_factor,
    poisson_weights,
    semi_defaultable_zcb_ou,
    survival_operator,
)
from dirac_pricer.analytic import FixedSeverityDirac, defaultable_zcb_fixed
from dirac_pricer.ou_state import ou_moments, poisson_truncation_count

R2 = PiecewiseFlatCurve.flat(0.02)
ZETA2 = PiecewiseFlatCurve.flat(2.0)


def _collapse_engine(severity: float, convention: str = "one-minus") -> StateEngine:
    # band 1 puts the severity band at [0, 1]; x0 picks the wanted level
    x0 = math.atanh(2.0 * severity - 1.0)
    params = OUParams(theta=0.0, mu=0.0, sigma=0.0, x0=x0)
    return build_engine(
        params, BandTransform(1.0), GridSpec(n_nodes=1, max_events=1), convention=convention
    )


# ---------------------------------------------------------------------------
# driver moments and transform


def test_moments_at_zero_time():
    p = OUParams(theta=0.5, mu=1.0, sigma=0.3, x0=0.25)
    assert ou_moments(p, 0.0) == (0.25, 0.0)


def test_moments_sample_parameters():
    p = OUParams(theta=0.001, mu=0.73, sigma=0.6)
    mean, var = ou_moments(p, 1.0)
    assert mean == pytest.approx(0.73 * -math.expm1(-0.001), rel=1e-14)
    assert var == pytest.approx(0.36 * -math.expm1(-0.002) / 0.002, rel=1e-14)
    # nearly the diffusive limit at this mean-reversion speed
    assert mean == pytest.approx(0.00073, abs=5e-7)
    assert var == pytest.approx(0.35964, abs=5e-5)


def test_moments_zero_theta_diffusive_limit():
    p = OUParams(theta=0.0, mu=5.0, sigma=0.6, x0=0.2)
    mean, var = ou_moments(p, 3.0)
    assert mean == 0.2
    assert var == pytest.approx(0.36 * 3.0, rel=1e-15)


def test_moments_instant_reversion():
    p = OUParams(theta=1e8, mu=0.7, sigma=0.5, x0=-2.0)
    mean, var = ou_moments(p, 1.0)
    assert mean == pytest.approx(0.7, rel=1e-12)
    assert var == pytest.approx(0.25 / 2e8, rel=1e-8)


def test_moments_negative_time_rejected():
    with pytest.raises(ValueError):
        ou_moments(OUParams(0.1, 0.0, 0.1), -1.0)


def test_band_transform_values():
    assert band_transform(0.0, BandTransform(1.0)) == pytest.approx(0.5, rel=1e-15)
    assert band_transform(40.0, BandTransform(3.0)) == pytest.approx(1.0, rel=1e-12)
    assert band_transform(0.0, BandTransform(6.0)) == pytest.approx(11.0 / 12.0, rel=1e-15)
    xs = np.linspace(-6.0, 6.0, 101)
    vals = band_transform(xs, BandTransform(6.0))
    assert np.all(np.diff(vals) > 0.0)
    assert np.all(vals >= 1.0 - 1.0 / 6.0) and np.all(vals <= 1.0)


def test_band_parameter_below_one_rejected():
    with pytest.raises(ValueError):
        BandTransform(0.5)


# ---------------------------------------------------------------------------
# Poisson weights


def test_poisson_weights_zero_intensity():
    w = poisson_weights(0.0)
    assert len(w) == 1 and w[0] == 1.0
    assert poisson_truncation_count(0.0) == 0


def test_poisson_weights_examples_and_oracle():
    w = poisson_weights(2.0)
    assert w[0] == pytest.approx(math.exp(-2.0), rel=1e-15)
    w10 = poisson_weights(10.0, 1e-12)
    assert w10.sum() >= 1.0 - 1e-12
    np.testing.assert_allclose(w10, poisson.pmf(np.arange(len(w10)), 10.0), rtol=1e-12)


def test_poisson_weights_errors():
    with pytest.raises(ValueError):
        poisson_weights(-1.0)
    with pytest.raises(ValueError):
        poisson_weights(1.0, tail_tol=0.0)


# ---------------------------------------------------------------------------
# engine construction


def test_single_state_collapse_fields():
    eng = _collapse_engine(0.5)
    assert eng.n_states == 1
    assert eng.transition.shape == (1, 1) and eng.transition[0, 0] == 1.0
    assert eng.severities[0] == pytest.approx(0.5, rel=1e-14)
    assert eng.initial_weights[0] == 1.0


def test_frozen_driver_gives_identity_transition():
    params = OUParams(theta=0.0, mu=0.6, sigma=0.0, x0=0.0)
    eng = build_engine(params, BandTransform(1.0), GridSpec(n_nodes=31, max_events=5))
    np.testing.assert_allclose(eng.transition, np.eye(31), atol=1e-15)


def test_sample_parameter_engine_invariants(sample_engine):
    assert sample_engine.n_states == 201
    np.testing.assert_allclose(sample_engine.transition.sum(axis=1), 1.0, atol=1e-12)
    assert sample_engine.initial_weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(sample_engine.severities >= 1.0 - 1.0 / 6.0 - 1e-12)
    assert np.all(sample_engine.severities <= 1.0 + 1e-12)
    # initial driver value sits between the bracketing nodes it is spread over
    nz = np.nonzero(sample_engine.initial_weights)[0]
    assert len(nz) <= 2
    assert sample_engine.nodes[nz[0]] <= 0.0 <= sample_engine.nodes[nz[-1]]


def test_tsov_engine_shares_grid(sample_params, sample_band):
    eng = build_engine(
        sample_params,
        sample_band,
        GridSpec(n_nodes=51, max_events=44),
        sigma_post=0.1,
        switch_time=1.0,
    )
    assert eng.transition_post is not None
    np.testing.assert_allclose(eng.transition_post.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        build_engine(sample_params, sample_band, GridSpec(n_nodes=5, max_events=4), sigma_post=0.1)


# ---------------------------------------------------------------------------
# survival operators


@pytest.mark.parametrize("severity", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_single_state_collapse_identity(severity, lam):
    eng = _collapse_engine(severity)
    v = survival_operator(eng, lam)
    assert abs(float(v[0]) - math.exp(-severity * lam)) <= 1e-10


def test_zero_severity_engine_survives_everything():
    nodes = np.linspace(-1.0, 1.0, 11)
    rng = np.random.default_rng(5)
    A = rng.random((11, 11))
    A /= A.sum(axis=1, keepdims=True)
    eng = StateEngine(
        nodes=nodes,
        severities=np.zeros(11),
        transition=A,
        initial_weights=np.full(11, 1.0 / 11.0),
        params=OUParams(0.1, 0.0, 0.1),
        band=BandTransform(1.0),
        grid=GridSpec(n_nodes=11),
    )
    np.testing.assert_allclose(survival_operator(eng, 7.0), 1.0, atol=1e-11)


def test_zero_intensity_survival_is_one(sample_engine):
    np.testing.assert_array_equal(survival_operator(sample_engine, 0.0), 1.0)
    np.testing.assert_array_equal(conditional_survival_vector(sample_engine, 0.0), 1.0)


def test_conditional_vector_monotone_in_state(sample_engine):
    # higher driver -> higher severity -> lower conditional survival
    v = conditional_survival_vector(sample_engine, 2.0)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all(v >= 0.0) and np.all(v <= 1.0)


def test_event_split_matches_convolution(sample_engine):
    # same matrix on both blocks: independent counts convolve back to one sum
    joint = survival_operator(sample_engine, 3.0)
    split = survival_operator(sample_engine, 0.0, event_split=(1.2, 1.8))
    np.testing.assert_allclose(split, joint, atol=1e-11)


def test_bond_zero_intensity_is_riskless(sample_engine):
    price = semi_defaultable_zcb_ou(sample_engine, R2, PiecewiseFlatCurve.flat(0.0), 0.0, 5.0, 5.0)
    assert price == pytest.approx(discount_factor(R2, 0.0, 5.0), rel=1e-13)


def test_bond_single_state_collapse():
    eng = _collapse_engine(0.3)
    price = defaultable_zcb_ou(eng, R2, ZETA2, 0.0, 5.0)
    assert price == pytest.approx(math.exp(-0.1) * math.exp(-0.3 * 10.0), rel=1e-10)


def test_semi_bond_discounts_and_exposes_separately(sample_engine):
    semi = semi_defaultable_zcb_ou(sample_engine, R2, ZETA2, 0.0, 1.0, 0.5)
    full = defaultable_zcb_ou(sample_engine, R2, ZETA2, 0.0, 1.0)
    assert semi > full  # shorter default exposure, same discounting
    with pytest.raises(ValueError):
        semi_defaultable_zcb_ou(sample_engine, R2, ZETA2, 1.0, 0.5, 2.0)


@pytest.mark.parametrize("convention,expected", [("one-minus", "one-minus"), ("exp", "exp")])
def test_frozen_engine_reproduces_fixed_severity(convention, expected):
    # sigma = 0, theta = 0: the driver never moves, severity stays at x0's level
    severity = 0.35
    eng = _collapse_engine(severity, convention=convention)
    assert eng.convention == expected
    got = defaultable_zcb_ou(eng, R2, ZETA2, 0.0, 5.0)
    if convention == "exp":
        spec = FixedSeverityDirac(ZETA2, severity)
        assert got == pytest.approx(defaultable_zcb_fixed(spec, R2, 0.0, 5.0), rel=1e-6)
    else:
        assert got == pytest.approx(math.exp(-0.1) * math.exp(-severity * 10.0), rel=1e-6)


def test_frozen_multi_node_engine_matches_collapse():
    # same frozen driver, but on a 21-node grid: x0 must interpolate exactly
    severity = 0.35
    x0 = math.atanh(2.0 * severity - 1.0)
    params = OUParams(theta=0.0, mu=x0 + 0.8, sigma=0.0, x0=x0)
    eng = build_engine(params, BandTransform(1.0), GridSpec(n_nodes=21, max_events=3))
    got = defaultable_zcb_ou(eng, R2, ZETA2, 0.0, 2.0)
    # interpolation spreads x0 over two nodes; tolerance reflects that
    assert got == pytest.approx(math.exp(-0.04) * math.exp(-severity * 4.0), rel=2e-3)


def test_propagate_split_matches_manual_nesting(sample_params, sample_band):
    eng = build_engine(
        sample_params,
        sample_band,
        GridSpec(n_nodes=41, max_events=20),
        sigma_post=0.1,
        switch_time=1.0,
    )
    # manual two-block nesting with explicit matrix powers
    lam1, lam2 = 2.0, 4.0
    w1 = poisson_weights(lam1)
    w2 = poisson_weights(lam2)
    g = eng.survival_factors
    m_pre = eng.transition * g[None, :]
    m_post = eng.transition_post * g[None, :]
    inner = sum(
        w * np.linalg.matrix_power(m_post, i) @ np.ones(41) for i, w in enumerate(w2)
    )
    manual = sum(w * np.linalg.matrix_power(m_pre, i) @ inner for i, w in enumerate(w1))
    got = semi_defaultable_zcb_ou(eng, PiecewiseFlatCurve.flat(0.0), ZETA2, 0.0, 3.0, 3.0)
    assert got == pytest.approx(float(eng.initial_weights @ manual), rel=1e-11)


def test_tail_tolerance_stability(sample_engine):
    p12 = defaultable_zcb_ou(sample_engine, R2, ZETA2, 0.0, 5.0, tail_tol=1e-12)
    p14 = defaultable_zcb_ou(sample_engine, R2, ZETA2, 0.0, 5.0, tail_tol=1e-14)
    assert abs(p12 - p14) < 1e-10
