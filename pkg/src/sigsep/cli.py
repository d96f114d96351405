"""Command-line entry point.

Subcommands: separate, defect, simulate, bounds, bench.  Reports are
deterministic JSON (sorted keys, no timestamps); exit codes distinguish
parse errors (2), signal-admissibility gate failures (3), a degenerate
observable covariance (4) and optimizer non-convergence (5).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .ensembles import coredinates, mean_stationarity_gap, pushforward_affine
from .errors import (DegenerateObservableError, DegenerateSignalError,
                     OptimizationError, ParseError, SourceConditionError)
from .inversion import (ContrastDomain, KAPPA0_BLIND, OptimizerConfig,
                        minimize_contrast, theorem_constants)
from .lab import ScenarioConfig, run_scenario, sampled_source
from .premetric import ic_defect
from .serialize import dump_report, load_ensemble, save_ensemble

SCHEMA = "sigsep/report/1"


def _threads(args):
    env = os.environ.get("SIGSEP_THREADS")
    n = int(env) if env else 1
    return max(1, n)


def _emit(doc: dict, output):
    text = dump_report(doc)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _optimizer_config(args, threads):
    return OptimizerConfig(restarts=args.restarts, seed=args.seed,
                           threads=threads)


def cmd_separate(args) -> int:
    ensemble = load_ensemble(args.input)
    core = coredinates(ensemble, eps_diag_rel=args.eps_diag)
    core.require_gate()
    domain = ContrastDomain(ensemble.d, args.kappa0 or KAPPA0_BLIND)
    report = minimize_contrast(core, domain,
                               _optimizer_config(args, _threads(args)))
    doc = {"schema": SCHEMA, "command": "separate",
           "d": ensemble.d, "n_paths": ensemble.size,
           "kappa0": report.kappa0,
           "whitening": {"condition": report.whitening.condition,
                         "eigenvalues": report.whitening.eigenvalues},
           "contrast_values": list(report.contrast_values),
           "minimizers": [m.tolist() for m in report.minimizers],
           "minimizers_white": [m.tolist() for m in report.minimizers_white],
           "warnings": list(report.warnings)}
    _emit(doc, args.output)
    if report.minimizers and args.output:
        stem, _ = os.path.splitext(args.output)
        ext = ".csv" if args.csv else ".jsonl"
        demixed = pushforward_affine(ensemble, report.minimizers[0])
        save_ensemble(demixed, stem + ".demixed" + ext,
                      "csv" if args.csv else "jsonl")
    return 0


def cmd_defect(args) -> int:
    ensemble = load_ensemble(args.input)
    core = coredinates(ensemble, eps_diag_rel=args.eps_diag)
    doc = {"schema": SCHEMA, "command": "defect",
           "d": ensemble.d, "n_paths": ensemble.size,
           "diag_moments": core.diag, "diag_ok": core.diag_ok,
           "mean_stationarity_gap": mean_stationarity_gap(ensemble),
           "ic_defect": ic_defect(core) if core.diag_ok else None}
    _emit(doc, args.output)
    return 0


def cmd_simulate(args) -> int:
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {args.input}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid scenario JSON: {exc}") from None
    config = ScenarioConfig.from_dict(doc)
    if _threads(args) != config.threads:
        config = ScenarioConfig.from_dict(
            {**config.as_dict(), "threads": _threads(args)})
    report = run_scenario(config)
    # thread count changes scheduling, never results; keep reports
    # byte-identical across SIGSEP_THREADS settings
    report["scenario"]["threads"] = 1
    _emit(report, args.output)
    return 0


def cmd_bounds(args) -> int:
    ensemble = load_ensemble(args.input)
    try:
        with open(args.mixing, "r", encoding="utf-8") as fh:
            A = np.asarray(json.load(fh), dtype=float)
    except OSError as exc:
        raise ParseError(f"cannot read {args.mixing}: {exc}") from None
    except (json.JSONDecodeError, ValueError) as exc:
        raise ParseError(f"invalid mixing matrix: {exc}") from None
    if A.ndim != 2 or A.shape != (ensemble.d, ensemble.d):
        raise ParseError("mixing matrix shape must match the ensemble dimension")
    core = coredinates(ensemble, eps_diag_rel=args.eps_diag)
    record = theorem_constants(core, A, kappa0=args.kappa0,
                               delta_kappa=args.delta_kappa)
    doc = {"schema": SCHEMA, "command": "bounds", "mixing": A.tolist()}
    doc.update(record.as_dict())
    _emit(doc, args.output)
    return 0


def cmd_bench(args) -> int:
    from .ensembles import path_signatures

    rng = np.random.default_rng(args.seed)
    ensemble = sampled_source(args.d, args.n_paths, args.n_vertices, 0.0, rng)
    t0 = time.perf_counter()
    path_signatures(ensemble)
    t_sig = time.perf_counter() - t0
    core = coredinates(ensemble)
    t0 = time.perf_counter()
    minimize_contrast(core, ContrastDomain(args.d),
                      _optimizer_config(args, _threads(args)))
    t_opt = time.perf_counter() - t0
    doc = {"schema": SCHEMA, "command": "bench",
           "d": args.d, "n_paths": args.n_paths, "n_vertices": args.n_vertices,
           "seconds_signatures": t_sig, "seconds_separation": t_opt}
    _emit(doc, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigsep",
        description="Blind source separation from third-order signature moments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="input file")
        p.add_argument("--output", help="output report path (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int, default=32)
        p.add_argument("--kappa0", type=float, default=None)
        p.add_argument("--delta-kappa", type=float, default=1.0)
        p.add_argument("--eps-diag", type=float, default=1e-10)
        fmt = p.add_mutually_exclusive_group()
        fmt.add_argument("--json", dest="csv", action="store_false",
                         help="JSON/JSONL outputs (default)")
        fmt.add_argument("--csv", dest="csv", action="store_true",
                         help="CSV ensemble outputs")
        p.set_defaults(csv=False)

    p = sub.add_parser("separate", help="demix an observable ensemble")
    common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("defect", help="independence-defect diagnostics")
    common(p)
    p.set_defaults(func=cmd_defect)

    p = sub.add_parser("simulate", help="run a robustness scenario")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="recovery-bound constants for known truth")
    common(p)
    p.add_argument("--mixing", required=True, help="JSON file with the mixing matrix")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("bench", help="timing micro-benchmark")
    common(p, needs_input=False)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n-paths", type=int, default=200)
    p.add_argument("--n-vertices", type=int, default=9)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if getattr(args, "restarts", 1) < 1:
        print("error: restarts must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateSignalError, SourceConditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DegenerateObservableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OptimizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
