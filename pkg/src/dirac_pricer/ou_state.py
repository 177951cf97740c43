"""Severity state-space engine: OU driver in event time, banded tanh severity.

The severity driver takes one mean-reverting step per spike ("event time").
Discretizing the driver onto a grid turns pricing into Poisson-weighted powers
of a one-event step matrix ``A @ diag(g)``: ``A`` moves the driver, ``g`` is
the per-event survival factor at the destination node.  Calendar time enters
only through the Poisson weights of the event count.

Two per-event survival conventions are supported and must be chosen
explicitly:

- ``"one-minus"``: survival factor ``1 - s`` (severity is a default
  probability; the banded transform keeps it in ``[1-1/b, 1]``).
- ``"exp"``: survival factor ``e^{-s}`` (severity is hazard mass, matching
  the deterministic closed forms in :mod:`dirac_pricer.analytic`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .curves import PiecewiseFlatCurve, discount_factor, integrate, require_nonnegative

# Beyond this driver distance the tanh band is flat to ~1e-4 of its range, so
# wider grids add no resolution where the severity still moves.  Grid sizing
# clips its half-width here (see build_engine).
_SATURATION_RADIUS = math.atanh(1.0 - 1e-4)  # ~4.95

# Fallback event horizon for grid sizing when the driver has no stationary
# variance (theta == 0) and the caller gave no max_events.
_DEFAULT_SIZING_EVENTS = 64

_CONVENTIONS = {
    "one-minus": "one-minus",
    "one-minus-severity": "one-minus",
    "exp": "exp",
    "exp-severity": "exp",
}


def normalize_convention(name: str) -> str:
    try:
        return _CONVENTIONS[name.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown severity convention {name!r}; expected 'exp' or 'one-minus'"
        ) from None


@dataclass(frozen=True)
class OUParams:
    """Mean-reverting severity driver, parameterized per event step."""

    theta: float
    mu: float
    sigma: float
    x0: float = 0.0
    t_step: float = 1.0

    def __post_init__(self) -> None:
        if self.theta < 0.0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.t_step <= 0.0:
            raise ValueError(f"t_step must be > 0, got {self.t_step}")


@dataclass(frozen=True)
class BandTransform:
    """tanh band squeezing the driver into severities in [1 - 1/b, 1]."""

    b: float = 1.0

    def __post_init__(self) -> None:
        if self.b < 1.0:
            raise ValueError(f"band parameter must be >= 1, got {self.b}")


@dataclass(frozen=True)
class OUSeverityHazard:
    """Hazard spec: spike intensity plus OU-driven banded severity."""

    zeta: PiecewiseFlatCurve
    params: OUParams
    band: BandTransform

    def __post_init__(self) -> None:
        require_nonnegative(self.zeta)


@dataclass(frozen=True)
class GridSpec:
    """Driver-grid controls: node count, half-width in driver sd multiples,
    event horizon used for sizing, and the Poisson tail tolerance."""

    n_nodes: int = 201
    half_width: float = 6.0
    max_events: int | None = None
    tail_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.half_width <= 0.0:
            raise ValueError("half_width must be > 0")
        if not (0.0 < self.tail_tol < 1.0):
            raise ValueError("tail_tol must be in (0, 1)")
        if self.max_events is not None and self.max_events < 0:
            raise ValueError("max_events must be >= 0")


def ou_moments(params: OUParams, t: float) -> tuple[float, float]:
    """Mean and variance of the driver after elapsed event time t (from x0).

    theta == 0 uses the exact diffusive limit (mean x0, variance sigma^2 t).
    """
    if t < 0.0:
        raise ValueError(f"elapsed time must be >= 0, got {t}")
    if params.theta == 0.0:
        return params.x0, params.sigma**2 * t
    decay = math.exp(-params.theta * t)
    mean = params.mu * (1.0 - decay) + params.x0 * decay
    var = params.sigma**2 * -math.expm1(-2.0 * params.theta * t) / (2.0 * params.theta)
    return mean, var


def band_transform(x, band: BandTransform):
    """Severity from the driver: (tanh(x) + 1) / (2b) + (b - 1)/b, increasing in x."""
    b = band.b
    return (np.tanh(x) + 1.0) / (2.0 * b) + (b - 1.0) / b


def step_coefficients(theta: float, mu: float, sigma: float, dt: float) -> tuple[float, float, float]:
    """(decay, drift, sd) of one driver step: x' = decay*x + drift + sd*Z."""
    if theta == 0.0:
        return 1.0, 0.0, sigma * math.sqrt(dt)
    decay = math.exp(-theta * dt)
    var = sigma**2 * -math.expm1(-2.0 * theta * dt) / (2.0 * theta)
    return decay, mu * (1.0 - decay), math.sqrt(var)


@dataclass(eq=False)
class StateEngine:
    """Discretized severity driver: grid, one-event transition(s), severities.

    ``transition_post``/``switch_time`` carry an optional second transition
    matrix for events after a volatility switch (piecewise-flat term structure
    of driver volatility); both matrices share the node grid.
    """

    nodes: np.ndarray
    severities: np.ndarray
    transition: np.ndarray
    initial_weights: np.ndarray
    params: OUParams
    band: BandTransform
    grid: GridSpec
    convention: str = "one-minus"
    transition_post: np.ndarray | None = None
    switch_time: float | None = None
    sigma_post: float | None = None
    step: np.ndarray = field(init=False, repr=False)
    step_post: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        self.convention = normalize_convention(self.convention)
        g = self.survival_factors
        self.step = self.transition * g[None, :]
        if self.transition_post is not None:
            self.step_post = self.transition_post * g[None, :]
        self._validate()

    @property
    def n_states(self) -> int:
        return len(self.nodes)

    @property
    def survival_factors(self) -> np.ndarray:
        if self.convention == "one-minus":
            return 1.0 - self.severities
        return np.exp(-self.severities)

    def _validate(self) -> None:
        n = self.n_states
        for name, m in (("transition", self.transition), ("transition_post", self.transition_post)):
            if m is None:
                continue
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if np.any(m < 0.0):
                raise ValueError(f"{name} has negative entries")
            if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError(f"{name} rows must sum to 1 within 1e-12")
        if np.any(self.initial_weights < 0.0) or abs(self.initial_weights.sum() - 1.0) > 1e-12:
            raise ValueError("initial weights must be nonnegative and sum to 1")
        lo = 1.0 - 1.0 / self.band.b
        if np.any(self.severities < lo - 1e-12) or np.any(self.severities > 1.0 + 1e-12):
            raise ValueError("severities must lie inside the transform band")
        if (self.transition_post is None) != (self.switch_time is None):
            raise ValueError("transition_post and switch_time must be given together")


def _transition_matrix(nodes: np.ndarray, decay: float, drift: float, sd: float) -> np.ndarray:
    n = len(nodes)
    if n == 1:
        return np.ones((1, 1))
    means = decay * nodes + drift
    interior = 0.5 * (nodes[1:] + nodes[:-1])
    if sd == 0.0:
        # Frozen or purely drifting driver: all mass lands in the destination cell.
        idx = np.searchsorted(interior, means, side="right")
        A = np.zeros((n, n))
        A[np.arange(n), idx] = 1.0
        return A
    edges = np.concatenate(([-np.inf], interior, [np.inf]))
    cdf = ndtr((edges[None, :] - means[:, None]) / sd)
    A = cdf[:, 1:] - cdf[:, :-1]
    A /= A.sum(axis=1, keepdims=True)
    return A


def _initial_weights(nodes: np.ndarray, x0: float) -> np.ndarray:
    n = len(nodes)
    h = np.zeros(n)
    if n == 1 or x0 <= nodes[0]:
        h[0] = 1.0
        return h
    if x0 >= nodes[-1]:
        h[-1] = 1.0
        return h
    j = int(np.searchsorted(nodes, x0))
    w = (x0 - nodes[j - 1]) / (nodes[j] - nodes[j - 1])
    h[j - 1] = 1.0 - w
    h[j] = w
    return h


def build_engine(
    params: OUParams,
    band: BandTransform,
    grid: GridSpec = GridSpec(),
    *,
    sigma_post: float | None = None,
    switch_time: float | None = None,
    convention: str = "one-minus",
) -> StateEngine:
    """Build the discretized engine: uniform nodes, midpoint-cell Gaussian
    transition mass (outer cells absorb the tails), banded severities, and
    initial weights interpolating x0 between its bracketing nodes.

    The grid spans [min(x0, mu) - w, max(x0, mu) + w] with
    w = min(half_width * max driver sd over the sizing horizon, saturation
    radius of the tanh band): widening past tanh saturation only dilutes
    resolution where the severity still varies.
    """
    if (sigma_post is None) != (switch_time is None):
        raise ValueError("sigma_post and switch_time must be given together")
    if sigma_post is not None and sigma_post < 0.0:
        raise ValueError("sigma_post must be >= 0")

    sigma_max = max(params.sigma, sigma_post or 0.0)
    if grid.max_events is not None:
        horizon = grid.max_events * params.t_step
        _, var_max = ou_moments(
            OUParams(params.theta, params.mu, sigma_max, params.x0, params.t_step), horizon
        )
    elif params.theta > 0.0:
        var_max = sigma_max**2 / (2.0 * params.theta)
    else:
        var_max = sigma_max**2 * _DEFAULT_SIZING_EVENTS * params.t_step
    half = min(grid.half_width * math.sqrt(var_max), _SATURATION_RADIUS)
    lo = min(params.x0, params.mu) - half
    hi = max(params.x0, params.mu) + half

    if grid.n_nodes == 1 or hi - lo < 1e-12:
        nodes = np.array([params.x0])
    else:
        nodes = np.linspace(lo, hi, grid.n_nodes)

    decay, drift, sd = step_coefficients(params.theta, params.mu, params.sigma, params.t_step)
    A = _transition_matrix(nodes, decay, drift, sd)
    A_post = None
    if sigma_post is not None:
        _, _, sd2 = step_coefficients(params.theta, params.mu, sigma_post, params.t_step)
        A_post = _transition_matrix(nodes, decay, drift, sd2)

    return StateEngine(
        nodes=nodes,
        severities=np.asarray(band_transform(nodes, band)),
        transition=A,
        initial_weights=_initial_weights(nodes, params.x0),
        params=params,
        band=band,
        grid=grid,
        convention=convention,
        transition_post=A_post,
        switch_time=switch_time,
        sigma_post=sigma_post,
    )


def poisson_weights(lam: float, tail_tol: float = 1e-12) -> np.ndarray:
    """Poisson pmf by recurrence, truncated once the remaining tail < tail_tol."""
    if lam < 0.0 or not math.isfinite(lam):
        raise ValueError(f"cumulative intensity must be finite and >= 0, got {lam}")
    if not (0.0 < tail_tol < 1.0):
        raise ValueError("tail_tol must be in (0, 1)")
    if lam > 700.0:
        raise ValueError("cumulative intensity too large for the direct pmf recurrence")
    w = math.exp(-lam)
    weights = [w]
    cum = w
    i = 0
    while 1.0 - cum > tail_tol:
        i += 1
        w *= lam / i
        weights.append(w)
        cum += w
        if w == 0.0 or i > 100_000:
            break
    return np.array(weights)


def poisson_truncation_count(lam: float, tail_tol: float = 1e-12) -> int:
    """Smallest N with Poisson tail mass beyond N below tail_tol."""
    return len(poisson_weights(lam, tail_tol)) - 1


def poisson_weighted_apply(
    matrix: np.ndarray, lam: float, vec: np.ndarray, tail_tol: float = 1e-12
) -> np.ndarray:
    """sum_i P{N(lam)=i} * matrix^i @ vec, by iterated matrix-vector products."""
    w = poisson_weights(lam, tail_tol)
    acc = w[0] * vec
    u = vec
    for wi in w[1:]:
        u = matrix @ u
        acc = acc + wi * u
    return acc


def _split_at_switch(
    engine: StateEngine, zeta: PiecewiseFlatCurve, t0: float, t1: float
) -> tuple[float, float]:
    """(pre-switch, post-switch) cumulative intensity over [t0, t1]."""
    sw = engine.switch_time
    if engine.step_post is None or sw is None or sw >= t1:
        return integrate(zeta, t0, t1), 0.0
    if sw <= t0:
        return 0.0, integrate(zeta, t0, t1)
    return integrate(zeta, t0, sw), integrate(zeta, sw, t1)


def propagate_survival(
    engine: StateEngine,
    vec: np.ndarray,
    zeta: PiecewiseFlatCurve,
    t0: float,
    t1: float,
    tail_tol: float | None = None,
) -> np.ndarray:
    """Expectation operator over events in (t0, t1] applied to a state payoff.

    Returns E[product of per-event survival factors * vec(end state) | start
    state], as a vector over start states.  Events before the engine's switch
    time use the pre matrix, later ones the post matrix; earlier events
    compose on the left.
    """
    if t1 < t0:
        raise ValueError("reversed propagation window")
    tail = engine.grid.tail_tol if tail_tol is None else tail_tol
    lam_pre, lam_post = _split_at_switch(engine, zeta, t0, t1)
    out = vec
    if lam_post > 0.0:
        out = poisson_weighted_apply(engine.step_post, lam_post, out, tail)
    return poisson_weighted_apply(engine.step, lam_pre, out, tail)


def survival_operator(
    engine: StateEngine,
    lam: float,
    event_split: tuple[float, float] | None = None,
    tail_tol: float | None = None,
) -> np.ndarray:
    """State-conditional survival vector sum_i w_i (A diag(g))^i 1.

    With ``event_split = (lam_pre, lam_post)`` the pre/post step matrices get
    their own independent Poisson counts (nested sums); ``lam`` is ignored.
    """
    tail = engine.grid.tail_tol if tail_tol is None else tail_tol
    ones = np.ones(engine.n_states)
    if event_split is not None:
        lam_pre, lam_post = event_split
        post = engine.step_post if engine.step_post is not None else engine.step
        inner = poisson_weighted_apply(post, lam_post, ones, tail)
        return poisson_weighted_apply(engine.step, lam_pre, inner, tail)
    return poisson_weighted_apply(engine.step, lam, ones, tail)


def conditional_survival_vector(
    engine: StateEngine,
    lam: float,
    *,
    post: bool = False,
    tail_tol: float | None = None,
) -> np.ndarray:
    """Survival vector left uncontracted with the initial weights, so callers
    can build state-dependent instrument values; ``post=True`` selects the
    post-switch matrix."""
    tail = engine.grid.tail_tol if tail_tol is None else tail_tol
    matrix = engine.step_post if (post and engine.step_post is not None) else engine.step
    return poisson_weighted_apply(matrix, lam, np.ones(engine.n_states), tail)


def semi_defaultable_zcb_ou(
    engine: StateEngine,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    t: float,
    maturity: float,
    exposure_end: float,
    tail_tol: float | None = None,
) -> float:
    """DF(t, maturity) * h . survival over events in (t, exposure_end]."""
    if maturity < t or exposure_end < t:
        raise ValueError("maturity and exposure end must not precede valuation")
    require_nonnegative(zeta)
    v = propagate_survival(engine, np.ones(engine.n_states), zeta, t, exposure_end, tail_tol)
    return discount_factor(discount, t, maturity) * float(engine.initial_weights @ v)


def defaultable_zcb_ou(
    engine: StateEngine,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    t: float,
    maturity: float,
    tail_tol: float | None = None,
) -> float:
    return semi_defaultable_zcb_ou(engine, discount, zeta, t, maturity, maturity, tail_tol)


def engine_rows(engine: StateEngine):
    """Diagnostic rows (index, node, severity, row sums) for the CSV dump."""
    row_sums = engine.transition.sum(axis=1)
    post_sums = (
        engine.transition_post.sum(axis=1) if engine.transition_post is not None else None
    )
    for i in range(engine.n_states):
        row = {
            "index": i,
            "node": float(engine.nodes[i]),
            "severity": float(engine.severities[i]),
            "row_sum": float(row_sums[i]),
        }
        if post_sums is not None:
            row["row_sum_post"] = float(post_sums[i])
        yield row
