"""Batch CLI: subcommand dispatch over a validated config file.

Outputs are deterministic for a given (config, seed, flags): key = value text
on stdout, optional CSV via --out, reals printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import sys
import traceback

from . import dirac_sim, instruments
from .analytic import defaultable_zcb_fixed, semi_defaultable_zcb_fixed
from .implied_vol import smile as smile_table
from .config import INSTRUMENT_TYPES, ConfigError, RunConfig, parse_config
from .instruments import BondOptionSpec, CDSContract
from .ou_state import (
    defaultable_zcb_ou,
    engine_rows,
    normalize_convention,
    semi_defaultable_zcb_ou,
)

DEFAULT_STRIKE_MULTIPLES = "0.5,0.75,1,1.25,1.5,2"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _emit(pairs: list[tuple[str, object]], out_path: str | None) -> None:
    for key, value in pairs:
        print(f"{key} = {_fmt(value)}")
    if out_path:
        _write_csv(out_path, [k for k, _ in pairs], [[_fmt(v) for _, v in pairs]])


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _error_source(exc: BaseException) -> str:
    """Last in-package module on the traceback, for error provenance."""
    source = "dirac_pricer"
    for frame in traceback.extract_tb(exc.__traceback__):
        if "dirac_pricer" in frame.filename:
            stem = frame.filename.rsplit("/", 1)[-1].removesuffix(".py")
            source = f"dirac_pricer.{stem}"
    return source


def _engine_horizon(cfg: RunConfig) -> float:
    inst = cfg.instrument
    candidates = [t for t in (inst.maturity, inst.exposure_end, inst.expiry) if t is not None]
    return max(candidates) if candidates else 10.0


def _build_engine(cfg: RunConfig):
    return cfg.model.build_engine(_engine_horizon(cfg))


def _cds_contract(cfg: RunConfig, premium: float | None) -> CDSContract:
    inst = cfg.instrument
    return CDSContract(
        protection_start=inst.start,
        protection_end=inst.maturity,
        lgd=cfg.market.lgd,
        premium_rate=premium,
    )


def _cmd_price(args: argparse.Namespace, cfg: RunConfig) -> int:
    inst = cfg.instrument
    if args.instrument != inst.type:
        print(
            f"ERROR dirac_pricer.cli: config instrument type '{inst.type}' "
            f"does not match requested '{args.instrument}'",
            file=sys.stderr,
        )
        return 2
    model, market = cfg.model, cfg.market
    pairs: list[tuple[str, object]] = [("instrument", inst.type)]

    if inst.type == "zcb-defaultable":
        if model.mode == "fixed":
            price = defaultable_zcb_fixed(model.fixed_spec(), market.discount, 0.0, inst.maturity)
        else:
            price = defaultable_zcb_ou(
                _build_engine(cfg), market.discount, model.intensity, 0.0, inst.maturity
            )
        pairs += [("maturity", inst.maturity), ("price", price)]

    elif inst.type == "zcb-semi":
        if model.mode == "fixed":
            price = semi_defaultable_zcb_fixed(
                model.fixed_spec(), market.discount, 0.0, inst.maturity, inst.exposure_end
            )
        else:
            price = semi_defaultable_zcb_ou(
                _build_engine(cfg),
                market.discount,
                model.intensity,
                0.0,
                inst.maturity,
                inst.exposure_end,
            )
        pairs += [
            ("maturity", inst.maturity),
            ("exposure_end", inst.exposure_end),
            ("price", price),
        ]

    elif inst.type == "cds":
        contract = _cds_contract(cfg, inst.premium)
        if model.mode == "fixed":
            pricer = instruments.fixed_severity_pricer(model.fixed_spec(), market.discount)
        else:
            pricer = instruments.ou_pricer(_build_engine(cfg), market.discount, model.intensity)
        par = instruments.cds_par_spread(contract, pricer)
        pairs += [("start", inst.start), ("maturity", inst.maturity), ("par_spread", par)]
        if inst.premium is not None:
            protection, premium_leg = instruments.cds_legs(contract, pricer)
            pairs += [
                ("premium_rate", inst.premium),
                ("protection_leg", protection),
                ("premium_leg", premium_leg),
                ("value", protection - premium_leg),
            ]

    elif inst.type == "irs":
        times = [inst.start + k / inst.frequency for k in range(0, _irs_periods(inst) + 1)]
        value = instruments.irs_value(inst.fixed_rate, times, market.discount)
        pairs += [
            ("start", inst.start),
            ("maturity", inst.maturity),
            ("fixed_rate", inst.fixed_rate),
            ("par_rate", instruments.irs_par_rate(times, market.discount)),
            ("value", value),
        ]

    elif inst.type == "bond-option":
        spec = BondOptionSpec(strike=inst.strike, exercise=inst.expiry, maturity=inst.maturity)
        price = instruments.bond_option_ou(
            _build_engine(cfg), spec, model.intensity, market.discount, kind=inst.kind
        )
        pairs += [
            ("expiry", inst.expiry),
            ("maturity", inst.maturity),
            ("strike", inst.strike),
            ("kind", inst.kind),
            ("price", price),
        ]

    elif inst.type == "cds-swaption":
        contract = _cds_contract(cfg, inst.strike)
        engine = _build_engine(cfg)
        price = instruments.cds_swaption(
            engine, contract, inst.expiry, market.discount, model.intensity
        )
        forward, prot_pv, ann_pv = instruments.forward_cds_quote(
            engine, contract, inst.expiry, market.discount, model.intensity
        )
        pairs += [
            ("expiry", inst.expiry),
            ("start", inst.start),
            ("maturity", inst.maturity),
            ("strike", inst.strike),
            ("forward_spread", forward),
            ("annuity_pv", ann_pv),
            ("protection_pv", prot_pv),
            ("price", price),
        ]

    _emit(pairs, args.out)
    return 0


def _irs_periods(inst) -> int:
    span = inst.maturity - inst.start
    periods = round(span * inst.frequency)
    if abs(span * inst.frequency - periods) > 1e-9 or periods < 1:
        raise ValueError("swap span must be a whole number of periods")
    return periods


def _cmd_simulate(args: argparse.Namespace, cfg: RunConfig) -> int:
    model = cfg.model
    n_paths = args.paths or cfg.mc.paths
    seed = cfg.mc.seed if args.seed is None else args.seed
    horizon = _engine_horizon(cfg)
    rows = []
    for pid in range(n_paths):
        rng = dirac_sim.path_stream(seed, pid)
        path = dirac_sim.sample_inhomogeneous_events(model.intensity, horizon, rng)
        if model.mode == "fixed":
            path = dirac_sim.with_fixed_severity(path, model.severity)
        else:
            path = dirac_sim.with_ou_severities(
                path, model.ou_params(), model.band_transform(), rng
            )
        for t, s in zip(path.event_times, path.severities):
            rows.append([str(pid), _fmt(t), _fmt(s)])
    header = ["path_id", "event_time", "severity"]
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"paths = {n_paths}")
        print(f"events = {len(rows)}")
        print(f"out = {args.out}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return 0


def _smile_rows(args: argparse.Namespace, cfg: RunConfig):
    inst = cfg.instrument
    if inst.type != "cds-swaption":
        raise ValueError("smile needs a cds-swaption instrument section")
    multiples = tuple(float(x) for x in args.strikes.split(","))
    engine = _build_engine(cfg)
    contract = _cds_contract(cfg, inst.strike)
    return smile_table(
        engine,
        contract,
        inst.expiry,
        cfg.market.discount,
        cfg.model.intensity,
        strike_multiples=multiples,
    )


def _cmd_smile(args: argparse.Namespace, cfg: RunConfig) -> int:
    rows = _smile_rows(args, cfg)
    header = ["strike", "forward", "price", "implied_vol", "flag"]
    table = [
        [_fmt(r.strike), _fmt(r.forward), _fmt(r.price), _fmt(r.implied_vol), r.flag]
        for r in rows
    ]
    if args.out:
        _write_csv(args.out, header, table)
        print(f"rows = {len(rows)}")
        print(f"out = {args.out}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(table)
    if args.plot:
        from .report import render_smile

        render_smile(rows, args.plot)
        print(f"plot = {args.plot}")
    return 0


def _cmd_oracle_compare(args: argparse.Namespace, cfg: RunConfig) -> int:
    inst, model, market = cfg.instrument, cfg.model, cfg.market
    n_paths = args.paths or cfg.mc.paths
    seed = cfg.mc.seed if args.seed is None else args.seed
    convention = args.convention or model.convention

    if inst.type == "zcb-defaultable":
        if model.mode == "fixed":
            hazard = model.fixed_spec()
            analytic_price = defaultable_zcb_fixed(hazard, market.discount, 0.0, inst.maturity)
            if normalize_convention(convention) != "exp":
                raise ValueError("fixed-severity closed form uses the exp convention")
        else:
            hazard = model.ou_hazard()
            engine = _build_engine(cfg)
            analytic_price = defaultable_zcb_ou(
                engine, market.discount, model.intensity, 0.0, inst.maturity
            )
        mc = dirac_sim.mc_defaultable_zcb(
            hazard, market.discount, inst.maturity, n_paths, seed, convention=convention
        )
    elif inst.type == "cds-swaption":
        engine = _build_engine(cfg)
        contract = _cds_contract(cfg, inst.strike)
        analytic_price = instruments.cds_swaption(
            engine, contract, inst.expiry, market.discount, model.intensity
        )
        mc = dirac_sim.mc_cds_swaption(
            engine, contract, inst.expiry, market.discount, model.intensity, n_paths, seed
        )
    else:
        raise ValueError(f"oracle-compare supports zcb-defaultable and cds-swaption, not '{inst.type}'")

    z = (mc.estimate - analytic_price) / mc.std_error if mc.std_error > 0.0 else 0.0
    _emit(
        [
            ("instrument", inst.type),
            ("analytic", analytic_price),
            ("mc_estimate", mc.estimate),
            ("mc_std_error", mc.std_error),
            ("z_score", z),
            ("paths", n_paths),
            ("seed", seed),
        ],
        args.out,
    )
    return 0


def _cmd_dump_engine(args: argparse.Namespace, cfg: RunConfig) -> int:
    if cfg.model.mode != "ou":
        raise ValueError("dump-engine needs an OU severity model")
    engine = _build_engine(cfg)
    rows = list(engine_rows(engine))
    header = list(rows[0].keys())
    table = [[_fmt(row[k]) for k in header] for row in rows]
    if args.out:
        _write_csv(args.out, header, table)
        print(f"states = {len(rows)}")
        print(f"out = {args.out}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(table)
    return 0


def _add_common(parser: argparse.ArgumentParser, mc_flags: bool = False) -> None:
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=None, help="CSV output path")
    if mc_flags:
        parser.add_argument("--paths", type=int, default=None, help="Monte Carlo path count")
        parser.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirac-pricer",
        description="Spike-driven short-rate and hazard-rate pricing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_price = sub.add_parser("price", help="closed-form / state-space prices")
    p_price.add_argument("instrument", choices=list(INSTRUMENT_TYPES))
    _add_common(p_price)

    p_sim = sub.add_parser("simulate", help="emit per-path events as CSV")
    _add_common(p_sim, mc_flags=True)

    p_smile = sub.add_parser("smile", help="implied-vol smile table")
    _add_common(p_smile)
    p_smile.add_argument("--strikes", default=DEFAULT_STRIKE_MULTIPLES, help="strike multiples of the forward")
    p_smile.add_argument("--plot", default=None, help="render the smile figure to this file")

    p_cmp = sub.add_parser("oracle-compare", help="analytic price vs Monte Carlo")
    _add_common(p_cmp, mc_flags=True)
    p_cmp.add_argument("--convention", default=None, help="exp | one-minus severity convention")

    p_dump = sub.add_parser("dump-engine", help="CSV dump of nodes, severities, row sums")
    _add_common(p_dump)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"ERROR dirac_pricer.config: {msg}", file=sys.stderr)
        return 2
    handlers = {
        "price": _cmd_price,
        "simulate": _cmd_simulate,
        "smile": _cmd_smile,
        "oracle-compare": _cmd_oracle_compare,
        "dump-engine": _cmd_dump_engine,
    }
    try:
        return handlers[args.command](args, cfg)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"ERROR {_error_source(exc)}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
