"""Command line entry point: ``phononmem <subcommand> [options]``.

Exit status is 0 on success, 2 on invalid input or configuration and 3 when
an optimizer fails to converge.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ..errors import ConvergenceError, ValidationError
from . import experiments
from .config import load_config, parse_tau_grid
from .countsio import export_counts, ingest_counts
from .report import emit_report

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 2, 3

_DEFAULT_PRESET = {
    "simulate-qubit": "qubit-fig2",
    "simulate-entangled": "entangled-fig4",
    "predict": "qubit-fig2",
    "analyze": "qubit-fig2",
    "fit": "qubit-fig2",
}
_MODE = {
    "simulate-qubit": "qubit-storage",
    "simulate-entangled": "entangled-storage",
    "predict": "predict",
    "analyze": "analyze",
    "fit": "fit",
}


def _global_flags(suppress):
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=default, help="preset name (qubit-fig2, entangled-fig4) or TOML file")
    g.add_argument("--seed", type=int, default=default, help="master seed (falls back to PHONONMEM_SEED)")
    g.add_argument("--out", default=default, help="output path stem; writes <out>.json and/or <out>.csv")
    g.add_argument("--format", choices=("json", "csv", "both"), default=default)
    g.add_argument("--mc-resamples", type=int, default=default, help="Monte Carlo resamples per delay")
    g.add_argument("--tau-grid", default=default, help="start:stop:step or comma list, in ps")
    return p


def build_parser():
    top = _global_flags(suppress=False)
    sub_flags = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="phononmem", parents=[top],
                                     description="Simulate and analyze a diamond Raman quantum memory.")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("simulate-qubit", "process tomography of stored polarization qubits"),
                        ("simulate-entangled", "state tomography after storing one photon of a Bell pair")):
        s = subs.add_parser(name, parents=[sub_flags], help=help_)
        s.add_argument("--export-counts", help="also write the simulated counts as CSV")

    s = subs.add_parser("predict", parents=[sub_flags], help="cooling and pulse-energy predictions")
    s.add_argument("--scenario", choices=("cooling", "energy", "both", "identity"))
    s.add_argument("--temperature", type=float, help="cooled crystal temperature, K")
    s.add_argument("--energy", type=float, help="read and write pulse energy, nJ")

    s = subs.add_parser("analyze", parents=[sub_flags], help="reconstruct ingested coincidence counts")
    s.add_argument("--counts", required=True, help="counts CSV")

    s = subs.add_parser("fit", parents=[sub_flags], help="fit retrieval-rate curves")
    s.add_argument("--rates", help="CSV with tau_ps,rate_hz[,weight] for the signal curve")
    s.add_argument("--noise-rates", help="same layout for the noise-only curve")
    s.add_argument("--method", choices=("sequential", "joint"))
    return parser


def _read_rates(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    if not rows or not {"tau_ps", "rate_hz"} <= set(rows[0]):
        raise ValidationError(f"{path}: need columns tau_ps and rate_hz")
    try:
        tau = np.array([float(r["tau_ps"]) for r in rows])
        rate = np.array([float(r["rate_hz"]) for r in rows])
        weight = np.array([float(r["weight"]) for r in rows]) if "weight" in rows[0] else None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return (tau, rate) if weight is None else (tau, rate, weight)


def _configure(args):
    cfg = load_config(args.config or _DEFAULT_PRESET[args.command])
    changes = {"mode": _MODE[args.command]}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mc_resamples is not None:
        changes["mc_resamples"] = args.mc_resamples
    if args.tau_grid is not None:
        changes["tau_grid"] = parse_tau_grid(args.tau_grid)
    if args.format is not None:
        changes["output_format"] = args.format
    if args.out is not None:
        changes["output_path"] = args.out
    if args.command == "predict":
        if args.scenario:
            changes["predict_scenario"] = args.scenario
        if args.temperature is not None:
            changes["predict_temperature_k"] = args.temperature
        if args.energy is not None:
            changes["predict_energy_nj"] = args.energy
    if args.command == "fit" and args.method:
        changes["fit_method"] = args.method
    return cfg.replace(**changes)


def execute(args):
    cfg = _configure(args)
    if args.command == "analyze":
        report = experiments.run_analysis(cfg, ingest_counts(args.counts))
    elif args.command == "fit":
        signal = _read_rates(args.rates) if args.rates else None
        noise = _read_rates(args.noise_rates) if args.noise_rates else None
        if noise is not None and signal is None:
            raise ValidationError("--noise-rates needs --rates")
        report = experiments.run_fit(cfg, signal, noise)
    else:
        report = experiments.run(cfg)
    paths = emit_report(report, cfg.output_path, cfg.output_format)
    if getattr(args, "export_counts", None):
        recs = [r for tau in sorted(report.records) for r in report.records[tau]]
        paths.append(export_counts(recs, args.export_counts))
    return report, paths


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _, paths = execute(args)
    except ValidationError as exc:
        print(f"phononmem: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"phononmem: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    for p in paths:
        print(Path(p))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
