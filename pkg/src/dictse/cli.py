"""Command line interface.

Exit codes: 0 success, 1 configuration or validation error, 2 solver
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ExperimentConfig, load_config, with_overrides
from .dictionary import write_dictionary_csv
from .errors import (
    BadInitialization,
    DegenerateCandidate,
    IdenticalColumns,
    NoViableCandidate,
    SpectrumEstimationError,
)
from .solver import lsse_solve

logger = logging.getLogger("dictse")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVE, EXIT_IO = 0, 1, 2, 3
SOLVE_ERRORS = (NoViableCandidate, DegenerateCandidate, IdenticalColumns, BadInitialization,
                ArithmeticError)


class SolveFailed(Exception):
    pass


def _setup(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig().validate()
    return with_overrides(config, seed=args.seed, output_dir=args.out)


def _materials(args, config):
    if args.materials:
        return [m.strip() for m in args.materials.split(",") if m.strip()]
    return [rod.material for rod in config.rods]


def cmd_simulate(args, config):
    table = config.material_table()
    dictionary = None if config.truth.path else config.build_dictionary(table)
    x_true = harness.truth_spectrum(config, dictionary)
    harness.generate_synthetic_dataset(config, x_true, config.output_dir, table)
    print(f"wrote {len(config.rods)} datasets to {config.output_dir / 'datasets'}")


def cmd_build_dict(args, config):
    dictionary = config.build_dictionary()
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "dictionary.csv"
    write_dictionary_csv(dictionary, path)
    print(f"wrote {dictionary.n_atoms} atoms to {path}")


def _fit_inputs(args, config):
    table = config.material_table()
    datasets = harness.load_datasets(config.output_dir, table, _materials(args, config), config.dedup)
    if not datasets:
        raise SpectrumEstimationError(f"no datasets under {config.output_dir / 'datasets'}")
    F, data = harness.stack_datasets(datasets)
    return table, F, data


def _truth_if_present(config):
    path = config.output_dir / harness.TRUTH_FILE
    return harness.read_spectrum_csv(path, config.energy_grid()) if path.is_file() else None


def cmd_estimate(args, config):
    table, F, data = _fit_inputs(args, config)
    out = config.output_dir / "estimate"
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "dictse":
        dictionary = config.build_dictionary(table)
        try:
            x, coeffs, trace = harness.fit_dictse(F, data, dictionary, config.solver)
        except SOLVE_ERRORS as exc:
            raise SolveFailed(str(exc)) from exc
        harness.write_coefficients_csv(coeffs, dictionary, out / "dictse_coefficients.csv")
        trace.write_csv(out / "dictse_trace.csv")
    else:
        x_init = harness.lsse_initial(config, _truth_if_present(config))
        try:
            x = lsse_solve(F, data, x_init, config.lsse.iterations)
        except SOLVE_ERRORS as exc:
            raise SolveFailed(str(exc)) from exc
    path = out / f"{args.method}_spectrum.csv"
    harness.emit_spectrum_csv(x, config.energy_grid(), path)
    print(f"wrote {path}")


def cmd_trace(args, config):
    table, F, data = _fit_inputs(args, config)
    dictionary = config.build_dictionary(table)
    try:
        _, _, trace = harness.fit_dictse(F, data, dictionary, config.solver)
    except SOLVE_ERRORS as exc:
        raise SolveFailed(str(exc)) from exc
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "trace.csv"
    trace.write_csv(path)
    print(f"wrote {path} ({len(trace.records)} rounds, stop: {trace.stop_reason})")


def cmd_crossval(args, config):
    table = config.material_table()
    datasets = harness.load_datasets(config.output_dir, table, _materials(args, config), config.dedup)
    dictionary = config.build_dictionary(table)
    x_init = harness.lsse_initial(config, _truth_if_present(config))
    out = config.output_dir / "crossval"
    report = harness.run_crossval(datasets, dictionary, config.solver, x_init,
                                  config.lsse.iterations, out)
    for c in report.cases:
        print(f"case {c.case}: fit {'+'.join(c.fit):<12} test {c.test:<6} "
              f"DictSE {c.nrmse_dictse:.4g}  LSSE {c.nrmse_lsse:.4g}  {c.status}")
    print(f"wrote {out / 'report.csv'}")
    if any(c.status != "ok" for c in report.cases):
        raise SolveFailed("one or more cross-validation cases failed")


COMMANDS = {
    "simulate": cmd_simulate,
    "build-dict": cmd_build_dict,
    "estimate": cmd_estimate,
    "crossval": cmd_crossval,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dictse", description="Dictionary-based X-ray spectral response estimation.")
    parser.add_argument("--config", type=Path, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, help="override the configured RNG seed")
    parser.add_argument("--out", type=Path, help="override the configured output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="write synthetic rod datasets")
    sub.add_parser("build-dict", help="write the dictionary CSV")
    p = sub.add_parser("estimate", help="fit a spectrum to the pooled datasets")
    p.add_argument("--method", choices=("dictse", "lsse"), default="dictse")
    p.add_argument("--materials", help="comma-separated dataset names (default: all rods)")
    p = sub.add_parser("crossval", help="leave-one-out cross-validation")
    p.add_argument("--materials", help="comma-separated dataset names (default: all rods)")
    p = sub.add_parser("trace", help="export the DictSE solver trace")
    p.add_argument("--materials", help="comma-separated dataset names (default: all rods)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _setup(args)
    except SpectrumEstimationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        COMMANDS[args.command](args, config)
    except SolveFailed as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpectrumEstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
