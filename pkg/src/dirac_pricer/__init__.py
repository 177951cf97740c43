"""Spike-driven short-rate and hazard-rate pricing toolkit.

Subpackages by role: deterministic curves, closed-form spike-hazard bonds,
the OU-severity state-space engine, tradable-level pricing, the lognormal
market model and smile, a seeded Monte Carlo oracle, and the batch CLI.
"""

from .analytic import (
    FixedSeverityDirac,
    MixedShortRateSpec,
    ScheduledEvents,
    defaultable_zcb_fixed,
    defaultable_zcb_mixed,
    scheduled_survival,
    semi_defaultable_zcb_fixed,
    semi_defaultable_zcb_mixed,
    tradeoff_intensity,
)
from .curves import PiecewiseFlatCurve, discount_factor, integrate
from .dirac_sim import (
    EventPath,
    MCResult,
    integrated_survival,
    mc_cds_swaption,
    mc_defaultable_zcb,
    sample_homogeneous_events,
    sample_inhomogeneous_events,
)
from .implied_vol import MarketModelQuote, SmileRow, black_payer, implied_vol, smile
from .instruments import (
    BondOptionSpec,
    CDSContract,
    bond_option_ou,
    cds_legs,
    cds_par_spread,
    cds_swaption,
    forward_cds_quote,
    irs_par_rate,
    irs_value,
)
from .ou_state import (
    BandTransform,
    GridSpec,
    OUParams,
    OUSeverityHazard,
    StateEngine,
    band_transform,
    build_engine,
    conditional_survival_vector,
    defaultable_zcb_ou,
    ou_moments,
    poisson_weights,
    semi_defaultable_zcb_ou,
    survival_operator,
)

__version__ = "0.1.0"
