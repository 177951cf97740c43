"""INI config ingestion for the CLI: flat sections, key = value, curves as
time:value pairs.  Validation collects every failure before reporting."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .analytic import FixedSeverityDirac
from .curves import PiecewiseFlatCurve
from .ou_state import (
    BandTransform,
    GridSpec,
    OUParams,
    OUSeverityHazard,
    StateEngine,
    build_engine,
    normalize_convention,
    poisson_truncation_count,
)
from .curves import integrate

REQUIRED_SECTIONS = ("model", "market", "instrument", "mc")

INSTRUMENT_TYPES = ("zcb-defaultable", "zcb-semi", "cds", "irs", "bond-option", "cds-swaption")

_MODEL_KEYS = {
    "intensity",
    "convention",
    "t_step",
    "severity",
    "theta",
    "mu",
    "sigma1",
    "sigma2",
    "tsov_switch",
    "x0",
    "band",
    "grid_nodes",
    "grid_halfwidth",
    "tail_tol",
    "max_events",
}
_MARKET_KEYS = {"discount", "recovery"}
_INSTRUMENT_KEYS = {
    "type",
    "maturity",
    "exposure_end",
    "start",
    "expiry",
    "strike",
    "premium",
    "fixed_rate",
    "frequency",
    "kind",
}
_MC_KEYS = {"paths", "seed"}


class ConfigError(Exception):
    """Carries the full list of validation failures."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def parse_curve(raw: str) -> PiecewiseFlatCurve:
    """"0.02" -> flat; "0:0.02, 1:0.03" -> breakpoints/values pairs."""
    text = raw.strip()
    if ":" not in text:
        return PiecewiseFlatCurve.flat(float(text))
    pairs = []
    for piece in text.split(","):
        t_str, _, v_str = piece.partition(":")
        pairs.append((float(t_str), float(v_str)))
    return PiecewiseFlatCurve.from_pairs(pairs)


@dataclass
class ModelConfig:
    mode: str  # "fixed" or "ou"
    intensity: PiecewiseFlatCurve
    convention: str
    t_step: float = 1.0
    severity: float | None = None
    theta: float | None = None
    mu: float | None = None
    sigma1: float | None = None
    sigma2: float | None = None
    tsov_switch: float | None = None
    x0: float = 0.0
    band: float | None = None
    grid_nodes: int = 201
    grid_halfwidth: float = 6.0
    tail_tol: float = 1e-12
    max_events: int | None = None

    def ou_params(self) -> OUParams:
        return OUParams(theta=self.theta, mu=self.mu, sigma=self.sigma1, x0=self.x0, t_step=self.t_step)

    def band_transform(self) -> BandTransform:
        return BandTransform(self.band)

    def grid_spec(self, horizon: float) -> GridSpec:
        max_events = self.max_events
        if max_events is None:
            max_events = poisson_truncation_count(
                integrate(self.intensity, 0.0, horizon), self.tail_tol
            )
        return GridSpec(
            n_nodes=self.grid_nodes,
            half_width=self.grid_halfwidth,
            max_events=max_events,
            tail_tol=self.tail_tol,
        )

    def build_engine(self, horizon: float) -> StateEngine:
        if self.mode != "ou":
            raise ValueError("engine requested for a fixed-severity model")
        return build_engine(
            self.ou_params(),
            self.band_transform(),
            self.grid_spec(horizon),
            sigma_post=self.sigma2,
            switch_time=self.tsov_switch,
            convention=self.convention,
        )

    def fixed_spec(self) -> FixedSeverityDirac:
        if self.mode != "fixed":
            raise ValueError("fixed-severity spec requested for an OU model")
        return FixedSeverityDirac(zeta=self.intensity, severity=self.severity)

    def ou_hazard(self) -> OUSeverityHazard:
        return OUSeverityHazard(zeta=self.intensity, params=self.ou_params(), band=self.band_transform())


@dataclass
class MarketConfig:
    discount: PiecewiseFlatCurve
    recovery: float

    @property
    def lgd(self) -> float:
        return 1.0 - self.recovery


@dataclass
class InstrumentConfig:
    type: str
    maturity: float | None = None
    exposure_end: float | None = None
    start: float | None = None
    expiry: float | None = None
    strike: float | None = None
    premium: float | None = None
    fixed_rate: float | None = None
    frequency: int = 1
    kind: str = "call"


@dataclass
class McConfig:
    paths: int = 100_000
    seed: int = 42


@dataclass
class RunConfig:
    model: ModelConfig
    market: MarketConfig
    instrument: InstrumentConfig
    mc: McConfig
    path: str = ""
    errors: list[str] = field(default_factory=list, repr=False)


class _SectionReader:
    """Typed key access with error collection instead of early exits."""

    def __init__(self, parser: configparser.ConfigParser, section: str, errors: list[str]):
        self.section = section
        self.errors = errors
        self.raw = dict(parser.items(section)) if parser.has_section(section) else {}

    def check_keys(self, allowed: set[str]) -> None:
        for key in self.raw:
            if key not in allowed:
                self.errors.append(f"[{self.section}] unknown key '{key}'")

    def has(self, key: str) -> bool:
        return key in self.raw

    def _get(self, key: str, caster, required: bool, default, what: str):
        if key not in self.raw:
            if required:
                self.errors.append(f"[{self.section}] missing required key '{key}'")
            return default
        try:
            return caster(self.raw[key])
        except (ValueError, TypeError) as exc:
            self.errors.append(f"[{self.section}] key '{key}' is not a valid {what}: {exc}")
            return default

    def get_float(self, key, required=False, default=None):
        return self._get(key, float, required, default, "number")

    def get_int(self, key, required=False, default=None):
        return self._get(key, int, required, default, "integer")

    def get_str(self, key, required=False, default=None):
        return self._get(key, str, required, default, "string")

    def get_curve(self, key, required=False, default=None):
        return self._get(key, parse_curve, required, default, "curve (time:value pairs)")


def _validate_model(reader: _SectionReader, errors: list[str]) -> ModelConfig | None:
    reader.check_keys(_MODEL_KEYS)
    intensity = reader.get_curve("intensity", required=True)
    if intensity is not None and intensity.min_value < 0.0:
        errors.append("[model] intensity must be nonnegative")
        intensity = None
    mode = "fixed" if reader.has("severity") else "ou"
    t_step = reader.get_float("t_step", default=1.0)
    conv_raw = reader.get_str("convention", default=("exp" if mode == "fixed" else "one-minus"))
    convention = None
    try:
        convention = normalize_convention(conv_raw)
    except ValueError as exc:
        errors.append(f"[model] {exc}")

    cfg = ModelConfig(mode=mode, intensity=intensity, convention=convention or "one-minus", t_step=t_step)
    if mode == "fixed":
        cfg.severity = reader.get_float("severity", required=True)
        if cfg.severity is not None and cfg.severity < 0.0:
            errors.append("[model] severity must be >= 0")
        for key in ("theta", "mu", "sigma1", "sigma2", "band"):
            if reader.has(key):
                errors.append(f"[model] key '{key}' conflicts with a fixed-severity model")
    else:
        cfg.theta = reader.get_float("theta", required=True)
        cfg.mu = reader.get_float("mu", required=True)
        cfg.sigma1 = reader.get_float("sigma1", required=True)
        cfg.band = reader.get_float("band", required=True)
        cfg.sigma2 = reader.get_float("sigma2")
        cfg.tsov_switch = reader.get_float("tsov_switch")
        cfg.x0 = reader.get_float("x0", default=0.0)
        cfg.grid_nodes = reader.get_int("grid_nodes", default=201)
        cfg.grid_halfwidth = reader.get_float("grid_halfwidth", default=6.0)
        cfg.tail_tol = reader.get_float("tail_tol", default=1e-12)
        cfg.max_events = reader.get_int("max_events")
        if cfg.theta is not None and cfg.theta < 0.0:
            errors.append("[model] theta must be >= 0")
        if cfg.sigma1 is not None and cfg.sigma1 < 0.0:
            errors.append("[model] sigma1 must be >= 0")
        if cfg.sigma2 is not None and cfg.sigma2 < 0.0:
            errors.append("[model] sigma2 must be >= 0")
        if cfg.band is not None and cfg.band < 1.0:
            errors.append("[model] band must be >= 1")
        if (cfg.sigma2 is None) != (cfg.tsov_switch is None):
            errors.append("[model] sigma2 and tsov_switch must be given together")
        if cfg.grid_nodes is not None and cfg.grid_nodes < 1:
            errors.append("[model] grid_nodes must be >= 1")
        if cfg.tail_tol is not None and not (0.0 < cfg.tail_tol < 1.0):
            errors.append("[model] tail_tol must be in (0, 1)")
    if t_step is not None and t_step <= 0.0:
        errors.append("[model] t_step must be > 0")
    return cfg


def _validate_market(reader: _SectionReader, errors: list[str]) -> MarketConfig:
    reader.check_keys(_MARKET_KEYS)
    discount = reader.get_curve("discount", required=True)
    recovery = reader.get_float("recovery", required=True)
    if recovery is not None and not 0.0 <= recovery <= 1.0:
        errors.append("[market] recovery must be in [0, 1]")
    return MarketConfig(discount=discount, recovery=recovery if recovery is not None else 0.4)


def _validate_instrument(reader: _SectionReader, errors: list[str]) -> InstrumentConfig:
    reader.check_keys(_INSTRUMENT_KEYS)
    itype = reader.get_str("type", required=True)
    if itype is not None and itype not in INSTRUMENT_TYPES:
        errors.append(f"[instrument] unknown type '{itype}'; expected one of {', '.join(INSTRUMENT_TYPES)}")
    cfg = InstrumentConfig(type=itype or "")
    cfg.maturity = reader.get_float("maturity")
    cfg.exposure_end = reader.get_float("exposure_end")
    cfg.start = reader.get_float("start")
    cfg.expiry = reader.get_float("expiry")
    cfg.strike = reader.get_float("strike")
    cfg.premium = reader.get_float("premium")
    cfg.fixed_rate = reader.get_float("fixed_rate")
    cfg.frequency = reader.get_int("frequency", default=1)
    cfg.kind = reader.get_str("kind", default="call")

    required_by_type = {
        "zcb-defaultable": ("maturity",),
        "zcb-semi": ("maturity", "exposure_end"),
        "cds": ("start", "maturity"),
        "irs": ("start", "maturity", "fixed_rate"),
        "bond-option": ("expiry", "maturity", "strike"),
        "cds-swaption": ("expiry", "start", "maturity", "strike"),
    }
    for key in required_by_type.get(itype or "", ()):
        if getattr(cfg, key) is None:
            errors.append(f"[instrument] type '{itype}' requires key '{key}'")
    if cfg.kind not in ("call", "put"):
        errors.append("[instrument] kind must be 'call' or 'put'")
    return cfg


def _validate_mc(reader: _SectionReader, errors: list[str]) -> McConfig:
    reader.check_keys(_MC_KEYS)
    paths = reader.get_int("paths", default=100_000)
    seed = reader.get_int("seed", default=42)
    if paths is not None and paths < 2:
        errors.append("[mc] paths must be >= 2")
    if seed is not None and not 0 <= seed < 2**64:
        errors.append("[mc] seed must fit in 64 bits")
    return McConfig(paths=paths or 100_000, seed=seed or 0)


def parse_config(path: str) -> RunConfig:
    """Parse and fully validate; raises ConfigError listing every failure."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None

    errors: list[str] = []
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            errors.append(f"missing required section [{section}]")
    for section in parser.sections():
        if section not in REQUIRED_SECTIONS:
            errors.append(f"unknown section [{section}]")

    model = market = instrument = mc = None
    if parser.has_section("model"):
        model = _validate_model(_SectionReader(parser, "model", errors), errors)
    if parser.has_section("market"):
        market = _validate_market(_SectionReader(parser, "market", errors), errors)
    if parser.has_section("instrument"):
        instrument = _validate_instrument(_SectionReader(parser, "instrument", errors), errors)
    if parser.has_section("mc"):
        mc = _validate_mc(_SectionReader(parser, "mc", errors), errors)

    if errors:
        raise ConfigError(errors)
    return RunConfig(model=model, market=market, instrument=instrument, mc=mc, path=path)
