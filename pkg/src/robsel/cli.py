"""Command-line entry point: ``robsel {fit,simulate,screen,synth}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import cli_io
from .cli_io import (
    EXIT_OK,
    EXIT_USAGE,
    FitRunConfig,
    SimulateRunConfig,
    StandInConfig,
    UsageError,
    commit_outputs,
    error_payload,
    exit_code_for,
    load_config_file,
    resolve_config,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robsel", description="Robust variable selection with missing data and measurement error.",
                allow_abbrev=False)
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="screen, fit and report on a CSV dataset", allow_abbrev=False)
    fit.add_argument("--config", help="JSON run configuration")
    fit.add_argument("--input", help="input CSV")
    fit.add_argument("--response", help="response column name")
    fit.add_argument("--output-dir", dest="output_dir", help="directory for results")
    fit.add_argument("--na-token", dest="na_token", help="cell text meaning absent (default: empty or NA)")
    fit.add_argument("--h", dest="hs", type=float, nargs="+", help="loss tuning values")
    fit.add_argument("--penalty", dest="penalties", nargs="+", choices=["lasso", "scad", "mcp", "atan"])
    fit.add_argument("--condition", dest="conditions", nargs="+",
                     choices=["full", "error_only", "missing_only", "none"])
    fit.add_argument("--seed", type=int)
    fit.add_argument("--subsample-size", dest="subsample_size", type=int)
    fit.add_argument("--screen-keep", dest="screen_keep", type=int, help="screened columns passed to the fit")
    fit.add_argument("--no-screen", dest="screen", action="store_const", const=False)
    fit.add_argument("--report-k", dest="report_k", type=int, help="features listed per method")
    fit.add_argument("--cv-folds", dest="cv_folds", type=int)

    sim = sub.add_parser("simulate", help="Monte Carlo model-error study", allow_abbrev=False)
    sim.add_argument("--config", help="JSON run configuration")
    sim.add_argument("--output-dir", dest="output_dir")
    sim.add_argument("--n", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--h", dest="hs", type=float, nargs="+")
    sim.add_argument("--penalty", dest="penalties", nargs="+", choices=["lasso", "scad", "mcp", "atan"])
    sim.add_argument("--condition", dest="conditions", nargs="+",
                     choices=["full", "error_only", "missing_only", "none"])
    sim.add_argument("--error-dist", dest="error_dists", nargs="+", choices=["normal", "t3", "chisq2"])
    sim.add_argument("--correlation", dest="correlations", nargs="+", choices=["ind", "corr"])
    sim.add_argument("--me-variance", dest="me_variance", type=float)

    scr = sub.add_parser("screen", help="rank columns by |correlation| with the response", allow_abbrev=False)
    scr.add_argument("--input", required=True)
    scr.add_argument("--response", required=True)
    scr.add_argument("--output", required=True, help="output JSON path")
    scr.add_argument("--k", type=int, default=5)
    scr.add_argument("--subsample-size", dest="subsample_size", type=int)
    scr.add_argument("--seed", type=int, default=0)
    scr.add_argument("--na-token", dest="na_token")

    syn = sub.add_parser("synth", help="write a synthetic wide stand-in dataset", allow_abbrev=False)
    syn.add_argument("--output", required=True, help="output CSV path")
    syn.add_argument("--response", default="y")
    syn.add_argument("--n", type=int, default=98)
    syn.add_argument("--d", type=int, default=2000)
    syn.add_argument("--seed", type=int, default=0)
    return p


def _flags(ns: argparse.Namespace, skip=("command", "config", "verbose")) -> dict:
    return {k: v for k, v in vars(ns).items() if k not in skip}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "fit":
            cfg = resolve_config(FitRunConfig, load_config_file(args.config), _flags(args))
            outputs = cli_io.run_fit_command(cfg)
        elif args.command == "simulate":
            cfg = resolve_config(SimulateRunConfig, load_config_file(args.config), _flags(args))
            outputs, _ = cli_io.run_simulate_command(cfg)
        elif args.command == "screen":
            outputs = cli_io.run_screen_command(args.input, args.response, args.output, args.k,
                                                args.subsample_size, args.seed, args.na_token)
        else:
            try:
                cfg = StandInConfig(n=args.n, d=args.d, seed=args.seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            outputs = cli_io.run_synth_command(cfg, args.output, args.response)
        for path in commit_outputs(outputs):
            print(path)
        return EXIT_OK
    except Exception as exc:  # every failure leaves as an exit code plus error JSON
        code = exit_code_for(exc)
        print(error_payload(exc, code), file=sys.stderr)
        return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
