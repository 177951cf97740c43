import pytest

from dirac_pricer import (
    BandTransform,
    GridSpec,
    OUParams,
    PiecewiseFlatCurve,
    build_engine,
)

PAPER_THETA = 0.001
PAPER_MU = 0.73
PAPER_SIGMA1 = 0.60
PAPER_SIGMA2 = 0.10
PAPER_BAND = 6.0
PAPER_INTENSITY = 2.0
PAPER_RATE = 0.02
PAPER_RECOVERY = 0.40


@pytest.fixture(scope="session")
def flat_intensity():
    return PiecewiseFlatCurve.flat(PAPER_INTENSITY)


@pytest.fixture(scope="session")
def flat_discount():
    return PiecewiseFlatCurve.flat(PAPER_RATE)


@pytest.fixture(scope="session")
def sample_params():
    return OUParams(theta=PAPER_THETA, mu=PAPER_MU, sigma=PAPER_SIGMA1)


@pytest.fixture(scope="session")
def sample_band():
    return BandTransform(PAPER_BAND)


@pytest.fixture(scope="session")
def sample_engine(sample_params, sample_band):
    # event horizon 44 covers Poisson(10) to tail mass 1e-12
    return build_engine(sample_params, sample_band, GridSpec(n_nodes=201, max_events=44))
