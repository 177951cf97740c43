"""Monte Carlo simulation of spike processes and their integrals: the
independent oracle for every closed-form price in the package.

Reproducibility contract: streams are counter-based (Philox) and keyed by
(seed, block index) over fixed-size path blocks, and block statistics combine
in block order, so results are bit-identical for a given (seed, parameters)
whatever the worker count.  ``DIRAC_PRICER_THREADS`` caps the default worker
pool without changing results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytic import FixedSeverityDirac
from .curves import PiecewiseFlatCurve, discount_factor, integrate, require_nonnegative
from .instruments import CDSContract, forward_cds_leg_vectors
from .ou_state import (
    BandTransform,
    OUParams,
    OUSeverityHazard,
    StateEngine,
    band_transform,
    normalize_convention,
    step_coefficients,
)

BLOCK_SIZE = 1 << 14

_MAX_SEED = 2**64


@dataclass(frozen=True)
class EventPath:
    """One simulated path: spike times in [0, horizon] and their severities."""

    event_times: tuple[float, ...]
    severities: tuple[float, ...]
    horizon: float

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.event_times)
        ss = tuple(float(s) for s in self.severities)
        object.__setattr__(self, "event_times", ts)
        object.__setattr__(self, "severities", ss)
        if len(ts) != len(ss):
            raise ValueError("event times and severities must have the same length")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be > 0")
        for t in ts:
            if not 0.0 <= t <= self.horizon:
                raise ValueError(f"event time {t} outside [0, {self.horizon}]")
        for a, b in zip(ts, ts[1:]):
            if b <= a:
                raise ValueError("event times must be strictly ascending")
        for s in ss:
            if not math.isfinite(s):
                raise ValueError("severities must be finite")


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    n_paths: int
    seed: int

    def __post_init__(self) -> None:
        if self.std_error < 0.0:
            raise ValueError("std_error must be >= 0")
        if self.n_paths <= 0:
            raise ValueError("n_paths must be positive")


def path_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, index); independent of scheduling."""
    if not 0 <= seed < _MAX_SEED:
        raise ValueError("seed must fit in 64 bits")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _default_workers() -> int:
    raw = os.environ.get("DIRAC_PRICER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_blocks(
    n_paths: int,
    seed: int,
    block_fn: Callable[[np.random.Generator, int], np.ndarray],
    workers: int | None,
) -> list[np.ndarray]:
    """Run block_fn over fixed-size path blocks; results returned in block order."""
    nblocks = (n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE
    sizes = [min(BLOCK_SIZE, n_paths - i * BLOCK_SIZE) for i in range(nblocks)]
    jobs = [(i, sizes[i]) for i in range(nblocks)]

    def run_one(job: tuple[int, int]) -> np.ndarray:
        index, size = job
        return block_fn(path_stream(seed, index), size)

    n_workers = _default_workers() if workers is None else max(1, workers)
    if n_workers == 1 or nblocks == 1:
        return [run_one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(run_one, jobs))


def _combine(stats: list[np.ndarray], n_paths: int, seed: int, scale: float = 1.0) -> MCResult:
    """Fold per-block (sum, sum of squares) into mean and standard error."""
    total = math.fsum(float(s[0]) for s in stats)
    total_sq = math.fsum(float(s[1]) for s in stats)
    mean = total / n_paths
    var = max(0.0, (total_sq - n_paths * mean * mean) / (n_paths - 1))
    return MCResult(
        estimate=scale * mean,
        std_error=scale * math.sqrt(var / n_paths),
        n_paths=n_paths,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# event-time samplers


def sample_homogeneous_events(nu: float, horizon: float, rng: np.random.Generator) -> EventPath:
    """Spike times with i.i.d. exponential gaps at rate nu (unit severities)."""
    if nu < 0.0 or not math.isfinite(nu):
        raise ValueError(f"rate must be finite and >= 0, got {nu}")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if nu == 0.0:
        return EventPath((), (), horizon)
    times: list[float] = []
    last = 0.0
    chunk = max(16, int(nu * horizon + 8.0 * math.sqrt(nu * horizon) + 8))
    while True:
        cum = last + np.cumsum(rng.exponential(1.0 / nu, chunk))
        inside = cum[cum <= horizon]
        times.extend(inside.tolist())
        if cum[-1] > horizon:
            break
        last = float(cum[-1])
    return EventPath(tuple(times), (1.0,) * len(times), horizon)


def sample_inhomogeneous_events(
    zeta: PiecewiseFlatCurve, horizon: float, rng: np.random.Generator
) -> EventPath:
    """Spike times for a deterministic rate curve, by inverting the cumulative
    intensity of a unit-rate process (exact for piecewise-flat rates)."""
    require_nonnegative(zeta)
    if horizon <= 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    lam_total = integrate(zeta, 0.0, horizon)
    if lam_total == 0.0:
        return EventPath((), (), horizon)
    marks: list[float] = []
    last = 0.0
    chunk = max(16, int(lam_total + 8.0 * math.sqrt(lam_total) + 8))
    while True:
        cum = last + np.cumsum(rng.exponential(1.0, chunk))
        inside = cum[cum <= lam_total]
        marks.extend(inside.tolist())
        if cum[-1] > lam_total:
            break
        last = float(cum[-1])
    t_knots = [0.0] + [b for b in zeta.breakpoints if 0.0 < b < horizon] + [horizon]
    cum_knots = [integrate(zeta, 0.0, t) for t in t_knots]
    times = np.interp(np.array(marks), np.array(cum_knots), np.array(t_knots))
    return EventPath(tuple(times.tolist()), (1.0,) * len(marks), horizon)


def with_fixed_severity(path: EventPath, severity: float) -> EventPath:
    return EventPath(path.event_times, (float(severity),) * len(path.event_times), path.horizon)


def with_ou_severities(
    path: EventPath, params: OUParams, band: BandTransform, rng: np.random.Generator
) -> EventPath:
    """Severities from the driver chain, one mean-reverting step per event."""
    decay, drift, sd = step_coefficients(params.theta, params.mu, params.sigma, params.t_step)
    x = params.x0
    sevs = []
    for _ in path.event_times:
        x = decay * x + drift + sd * rng.standard_normal()
        sevs.append(float(band_transform(x, band)))
    return EventPath(path.event_times, tuple(sevs), path.horizon)


# ---------------------------------------------------------------------------
# integrated survival and estimators


def integrated_survival(
    path: EventPath, t0: float, t1: float, convention: str = "exp-severity"
) -> float:
    """Survival factor from events with t0 < E_i <= t1.

    ``exp``: product of e^{-s_i}; ``one-minus``: product of (1 - s_i) with all
    severities required in [0, 1].
    """
    if t1 < t0:
        raise ValueError("reversed survival window")
    conv = normalize_convention(convention)
    times = np.asarray(path.event_times)
    i0 = int(np.searchsorted(times, t0, side="right"))
    i1 = int(np.searchsorted(times, t1, side="right"))
    sevs = path.severities[i0:i1]
    if conv == "exp":
        return math.exp(-math.fsum(sevs))
    for s in sevs:
        if not 0.0 <= s <= 1.0:
            raise ValueError(
                f"severity {s} outside [0, 1]: one-minus convention undefined"
            )
    out = 1.0
    for s in sevs:
        out *= 1.0 - s
    return out


def _fixed_factor(severity: float, convention: str) -> float:
    if convention == "exp":
        return math.exp(-severity)
    if not 0.0 <= severity <= 1.0:
        raise ValueError(f"severity {severity} outside [0, 1] under one-minus convention")
    return 1.0 - severity


def _ou_survival_block(
    rng: np.random.Generator,
    size: int,
    lam: float,
    params: OUParams,
    band: BandTransform,
    convention: str,
) -> np.ndarray:
    counts = rng.poisson(lam, size)
    prod = np.ones(size)
    decay, drift, sd = step_coefficients(params.theta, params.mu, params.sigma, params.t_step)
    x = np.full(size, params.x0)
    for k in range(1, int(counts.max(initial=0)) + 1):
        x = decay * x + drift + sd * rng.standard_normal(size)
        active = counts >= k
        sev = band_transform(x[active], band)
        if convention == "exp":
            prod[active] *= np.exp(-sev)
        else:
            prod[active] *= 1.0 - sev
    return np.array([prod.sum(), (prod * prod).sum()])


def mc_defaultable_zcb(
    hazard: FixedSeverityDirac | OUSeverityHazard,
    discount: PiecewiseFlatCurve,
    maturity: float,
    n_paths: int,
    seed: int,
    convention: str = "exp-severity",
    workers: int | None = None,
) -> MCResult:
    """DF(0,T) times the sample mean of integrated survival over seeded paths."""
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    if maturity <= 0.0:
        raise ValueError("maturity must be > 0")
    conv = normalize_convention(convention)
    lam = integrate(hazard.zeta, 0.0, maturity)

    if isinstance(hazard, FixedSeverityDirac):
        factor = _fixed_factor(hazard.severity, conv)

        def block_fn(rng: np.random.Generator, size: int) -> np.ndarray:
            vals = factor ** rng.poisson(lam, size)
            return np.array([vals.sum(), (vals * vals).sum()])

    elif isinstance(hazard, OUSeverityHazard):
        params, band = hazard.params, hazard.band

        def block_fn(rng: np.random.Generator, size: int) -> np.ndarray:
            return _ou_survival_block(rng, size, lam, params, band, conv)

    else:
        raise TypeError(f"unsupported hazard spec {type(hazard).__name__}")

    stats = _run_blocks(n_paths, seed, block_fn, workers)
    return _combine(stats, n_paths, seed, scale=discount_factor(discount, 0.0, maturity))


def mc_cds_swaption(
    engine: StateEngine,
    contract: CDSContract,
    exercise: float,
    discount: PiecewiseFlatCurve,
    zeta: PiecewiseFlatCurve,
    n_paths: int,
    seed: int,
    knockout: str = "bernoulli",
    workers: int | None = None,
    strikes: list[float] | tuple[float, ...] | None = None,
):
    """Simulated payer swaption: events and driver to exercise, per-event
    default draws for the knock-out, then the state-conditional forward legs
    evaluated at the realized driver (linear interpolation on the engine grid).

    ``knockout="weighted"`` replaces the default draws by survival weighting
    (lower variance, same expectation).  Returns an MCResult, or a list when
    ``strikes`` is given.
    """
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    if knockout not in ("bernoulli", "weighted"):
        raise ValueError(f"knockout must be 'bernoulli' or 'weighted', got {knockout!r}")
    if engine.switch_time is not None and abs(engine.switch_time - exercise) > 1e-9:
        raise ValueError("engine volatility switch must sit at the exercise date")
    require_nonnegative(zeta)

    prot_vec, ann_vec = forward_cds_leg_vectors(engine, contract, discount, zeta, exercise)
    if strikes is None:
        if contract.premium_rate is None:
            raise ValueError("no strike: contract has no premium rate")
        rates = [contract.premium_rate]
    else:
        rates = [float(r) for r in strikes]
    value_nodes = [prot_vec - r * ann_vec for r in rates]

    lam1 = integrate(zeta, 0.0, exercise)
    df = discount_factor(discount, 0.0, exercise)
    params, band, conv = engine.params, engine.band, engine.convention
    nodes = engine.nodes
    decay, drift, sd = step_coefficients(params.theta, params.mu, params.sigma, params.t_step)

    def block_fn(rng: np.random.Generator, size: int) -> np.ndarray:
        counts = rng.poisson(lam1, size)
        x = np.full(size, params.x0)
        weight = np.ones(size)
        alive = np.ones(size, dtype=bool)
        for k in range(1, int(counts.max(initial=0)) + 1):
            x_next = decay * x + drift + sd * rng.standard_normal(size)
            active = counts >= k
            x = np.where(active, x_next, x)
            sev = band_transform(x_next, band)
            survival = np.exp(-sev) if conv == "exp" else 1.0 - sev
            if knockout == "bernoulli":
                u = rng.random(size)
                alive &= ~(active & (u >= survival))
            else:
                weight[active] *= survival[active]
        if knockout == "bernoulli":
            weight = alive.astype(float)
        if len(nodes) == 1:
            out = np.empty((len(rates), 2))
            for j, vn in enumerate(value_nodes):
                pay = df * weight * max(float(vn[0]), 0.0)
                out[j] = (pay.sum(), (pay * pay).sum())
            return out
        idx = np.clip(np.searchsorted(nodes, x), 1, len(nodes) - 1)
        frac = np.clip((x - nodes[idx - 1]) / (nodes[idx] - nodes[idx - 1]), 0.0, 1.0)
        out = np.empty((len(rates), 2))
        for j, vn in enumerate(value_nodes):
            val = (1.0 - frac) * vn[idx - 1] + frac * vn[idx]
            pay = df * weight * np.maximum(val, 0.0)
            out[j] = (pay.sum(), (pay * pay).sum())
        return out

    stats = _run_blocks(n_paths, seed, block_fn, workers)
    results = [
        _combine([s[j] for s in stats], n_paths, seed) for j in range(len(rates))
    ]
    if strikes is None:
        return results[0]
    return results
