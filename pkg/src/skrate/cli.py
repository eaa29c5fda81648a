"""Command-line entry point: ``skrate {rates,sweep,optimize,validate}``.

Exit codes: 0 ok, 1 configuration error, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentConfig,
    columns,
    compute_rates,
    load_config,
    manifest,
    preset,
    run_sweep,
    run_validation,
    system_for,
    to_json,
    validate_config,
    write_csv,
)
from .optimize import SCHEDULE_NOTE, optimize_scheme
from .rates import NumericalError, RncModel

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config")
    common.add_argument("--preset", choices=["fig4", "fig5"], help="built-in sweep")
    common.add_argument("--fig5-snr", type=float, choices=[30.0, 35.0], default=30.0, help="SNR (dB) of the fig5 preset")
    common.add_argument("--seed", type=int, help="RNG seed (env SKRATE_SEED)")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--method", choices=["quadrature", "mc"], help="how fading expectations are computed")
    common.add_argument("--workers", type=int, help="parallel workers (env SKRATE_WORKERS)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], help="output format of sweep")
    common.add_argument("--rnc", help="R_NC model: training, genie or const:VALUE")
    common.add_argument("--eps1-rule", choices=["Tminus1", "T"], help="block count pricing the channel message")
    common.add_argument("--inject-fault", choices=["q1-sign"], help=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="skrate", description="Secret-key rate bounds over reciprocal block fading.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("rates", parents=[common], help="all requested bounds at one point (JSON)")
    sub.add_parser("sweep", parents=[common], help="sweep SNR or T (CSV + JSON summary)")
    sub.add_parser("optimize", parents=[common], help="optimized schemes at one point (JSON)")
    sub.add_parser("validate", parents=[common], help="run the cross-check suite")
    return p


def resolve_config(args) -> ExperimentConfig:
    """Defaults < preset < config file < environment < flags."""
    cfg = preset(args.preset, args.fig5_snr) if args.preset else ExperimentConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    ev = {}
    kw = {}
    env_seed = os.environ.get("SKRATE_SEED")
    env_workers = os.environ.get("SKRATE_WORKERS")
    try:
        if env_seed is not None:
            ev["seed"] = int(env_seed)
        if env_workers is not None:
            ev["workers"] = int(env_workers)
    except ValueError as e:
        raise ConfigError("environment", str(e)) from None
    for flag, key in (("seed", "seed"), ("samples", "n_samples"), ("method", "method"), ("workers", "workers")):
        v = getattr(args, flag)
        if v is not None:
            ev[key] = v
    if args.rnc is not None:
        try:
            kw["rnc"] = RncModel.parse(args.rnc)
        except ValueError as e:
            raise ConfigError("--rnc", str(e)) from None
    if args.eps1_rule is not None:
        kw["eps1_rule"] = args.eps1_rule
    if args.out is not None:
        kw["out"] = args.out
    if args.format is not None:
        kw["format"] = args.format
    if ev:
        kw["eval"] = ev
    return validate_config(cfg, **kw)


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_rates(cfg: ExperimentConfig) -> int:
    if cfg.axis is not None and len(cfg.values) != 1:
        raise ConfigError("sweep.values", "rates needs a single point; use sweep")
    T, snr = cfg.points()[0]
    rates = compute_rates(cfg, T, snr)
    report = {
        "manifest": manifest(cfg),
        "point": {"T": T, "snr_db": snr, "P": system_for(cfg, T, snr).P, "rho": cfg.rho},
        "totals": {c: r.total for c, r in rates.items()},
        "breakdowns": {c: r.to_dict() for c, r in rates.items()},
    }
    _emit(to_json(report), cfg.out)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    if cfg.axis is None:
        raise ConfigError("sweep", "no sweep axis; give [sweep] in the config or a --preset")
    rows = run_sweep(cfg)
    cols = columns(cfg)
    summary = {"manifest": manifest(cfg), "columns": cols, "rows": rows}
    if cfg.format == "json":
        _emit(to_json(summary), cfg.out)
    else:
        _emit(write_csv(rows, cols), cfg.out)
        if cfg.out is not None:
            Path(cfg.out).with_suffix(".json").write_text(
                to_json({"manifest": summary["manifest"], "columns": cols, "n_rows": len(rows),
                         "failed": [r[cols[0]] for r in rows if r["status"] != "ok"]})
            )
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NUMERIC


def cmd_optimize(cfg: ExperimentConfig) -> int:
    if cfg.axis is not None and len(cfg.values) != 1:
        raise ConfigError("sweep.values", "optimize needs a single point")
    T, snr = cfg.points()[0]
    targets = [c for c in cfg.curves if c in ("lower_pd", "lower_nodisc")]
    if not targets:
        raise ConfigError("curves", "optimize needs lower_pd and/or lower_nodisc")
    sys_ = system_for(cfg, T, snr)
    out = {"manifest": manifest(cfg), "point": {"T": T, "snr_db": snr, "rho": cfg.rho}, "results": {}}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for t in targets:
            rep = optimize_scheme(sys_, cfg.spec(t), cfg.rnc, cfg.eval)
            out["results"][t] = {
                "best": rep.best.to_dict(),
                "best_rate": rep.best_rate.to_dict(),
                "warm_start": rep.warm_start.to_dict(),
                "warm_start_note": rep.warm_start.note or SCHEDULE_NOTE,
                "warm_start_rate": rep.warm_start_rate,
                "pass_values": rep.passes,
                "evaluations": len(rep.trace),
            }
    _emit(to_json(out), cfg.out)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, fault: str | None) -> int:
    checks = run_validation(cfg, fault)
    text = "".join(c.line() + "\n" for c in checks)
    ok = all(c.passed for c in checks)
    text += ("all checks passed\n" if ok else f"{sum(not c.passed for c in checks)} check(s) failed\n")
    _emit(text, cfg.out)
    return EXIT_OK if ok else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "rates":
            return cmd_rates(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        return cmd_validate(cfg, args.inject_fault)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
