"""Command-line front end.

    fockwave run --config exp.toml [--preset fig2a] [--out DIR] [--dump-config]
    fockwave sweep --axis dt --values 0.02,0.01,0.005 [--preset fig2a]
    fockwave compare-no-tls --preset fig3
    fockwave validate [--out DIR]

The output directory resolves as ``--out``, then ``$FOCKWAVE_OUT``, then
``outputs.directory`` from the config.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, ExperimentConfig, config_from_dict, \
    dump_config, load_config
from .experiment import SWEEP_AXES

OUT_ENV = "FOCKWAVE_OUT"


def _load(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config, preset=args.preset)
    return config_from_dict({}, preset=args.preset)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or cfg.outputs.directory)


def _status(c) -> str:
    parts = [f"{'PASS' if c.passed else 'FAIL'} {c.name}"]
    if c.detail:
        parts.append(c.detail)
    if isinstance(c.simulated, (int, float)):
        parts.append(f"value={c.simulated:.3e}")
    if isinstance(c.tolerance, (int, float)):
        parts.append(f"tol={c.tolerance:g}")
    return " ".join(parts)


def _cmd_run(args) -> int:
    from .experiment import run

    cfg = _load(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return 0
    outcome = run(cfg, _out_dir(args, cfg))
    for c in outcome.report.checks:
        print(_status(c))
    for f in outcome.files:
        print(f"wrote {f}")
    return 0 if outcome.report.passed else 1


def _cmd_sweep(args) -> int:
    from .experiment import sweep_convergence

    cfg = _load(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: not a comma-separated number list: "
                          f"{args.values!r}") from None
    rows = sweep_convergence(cfg, args.axis, values, _out_dir(args, cfg))
    print("setting,error,max_bond,truncation_error,wall_time_s")
    for r in rows:
        print(f"{r['setting']:g},{r['error']:.6e},{r['max_bond']},"
              f"{r['truncation_error']:.3e},{r['wall_time']:.3f}")
    return 0


def _cmd_compare(args) -> int:
    from .experiment import compare_no_tls

    cfg = _load(args)
    outcome = compare_no_tls(cfg, _out_dir(args, cfg))
    for c in outcome.report.checks:
        print(_status(c))
    return 0 if outcome.report.passed else 1


def _cmd_validate(args) -> int:
    from .acceptance import run_acceptance

    report = run_acceptance(only=args.only)
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "acceptance_report.json")
    print(f"{'PASSED' if report.passed else 'FAILED'}: "
          f"{sum(c.passed for c in report.checks)}/{len(report.checks)} "
          f"criteria; report in {out / 'acceptance_report.json'}")
    return 0 if report.passed else 1


def _add_config_args(p: argparse.ArgumentParser, default_preset=None):
    p.add_argument("--config", type=Path, help="TOML experiment file")
    p.add_argument("--preset", choices=[*PRESETS, "none"],
                   default=default_preset,
                   help="figure preset (overrides the file's preset)")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockwave",
        description="Fock-state pulses on a chiral two-level emitter")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a config or preset")
    _add_config_args(p)
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration and exit")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="convergence sweep along one axis")
    _add_config_args(p, default_preset=None)
    p.add_argument("--axis", required=True, choices=list(SWEEP_AXES))
    p.add_argument("--values", required=True,
                   help="comma-separated, monotone list")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare-no-tls",
                       help="rerun without emitter coupling for reference")
    _add_config_args(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--out", type=Path)
    p.add_argument("--only", nargs="*", help="subset of criteria, e.g. A1 A5")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) != "validate":
        if args.config is None and args.preset in (None, "none"):
            if args.command != "run" or not args.dump_config:
                print("error: give --config or --preset", file=sys.stderr)
                return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
