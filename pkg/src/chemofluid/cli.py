"""Command line entry point: ``chemofluid {run,sweep,check,plot-data}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import OUTPUT_ROOT_ENV, load_config
from .errors import ChemofluidError, ConfigurationError
from .harness import EXIT_CONFIG, EXIT_SOLVER, check, plot_data, run, sweep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chemofluid",
        description="Chemotaxis-fluid simulator with indirect nutrient consumption.",
        epilog=f"Relative output directories are resolved against ${OUTPUT_ROOT_ENV} when it is set. "
               "Exit codes: 0 ok, 1 invariant failure, 2 solver error, 3 configuration error.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one scenario")
    p.add_argument("config", type=Path)
    p.add_argument("--trace-lyapunov", action="store_true",
                   help="evaluate F after every step for the monotonicity finding")

    p = sub.add_parser("sweep", help="run a scenario for several masses")
    p.add_argument("config", type=Path)
    p.add_argument("--masses", type=float, nargs="*", default=[], metavar="M")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("check", help="oracle and invariant checks on a config or checkpoint")
    p.add_argument("source", type=Path)
    p.add_argument("--json", type=Path, default=None, help="write the JSON report here (default: stdout)")
    p.add_argument("--horizon", type=float, default=1.0, help="length of the short run for configs")

    p = sub.add_parser("plot-data", help="export two-column files per tracked quantity")
    p.add_argument("source", type=Path, help="run directory or timeseries.csv")
    p.add_argument("--out", type=Path, default=None)
    return ap


def _cmd_run(args) -> int:
    res = run(load_config(args.config), trace_F=args.trace_lyapunov)
    print(f"t = {res.final_state.t:.6g} after {res.stats.steps} steps; output in {res.out_dir}")
    for name, fit in res.fits.items():
        if fit is not None:
            print(f"  rate {name:<11} {fit.kappa_hat: .5g}  (R^2 {fit.r2:.4f})")
    for r in res.invariants.results:
        print(f"  {'PASS' if r.passed else 'FAIL'} {r.name:<15} worst {r.worst:.3e}")
    lf = res.lyapunov
    print(f"  lyapunov: entered={lf.entered} monotone={lf.monotone} worst increase {lf.worst_increase:.3e}")
    if res.error:
        print(f"solver error: {res.error}", file=sys.stderr)
    return res.exit_code


def _cmd_sweep(args) -> int:
    report = sweep(load_config(args.config), args.masses, workers=args.workers)
    for r in report.rows:
        print(f"mass {r.mass!r}: {r.status} exit={r.exit_code} F-monotone={r.lyapunov_monotone} "
              f"invariants={r.invariants_passed}")
    return report.exit_code


def _cmd_check(args) -> int:
    report = check(args.source, horizon=args.horizon)
    payload = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    if args.json:
        print("\n".join(report.lines()))
        args.json.write_text(payload + "\n")
    else:
        print("\n".join(report.lines()), file=sys.stderr)
        print(payload)
    return report.exit_code


def _cmd_plot(args) -> int:
    files = plot_data(args.source, args.out)
    print(f"wrote {len(files)} files to {files[0].parent}")
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "check": _cmd_check, "plot-data": _cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChemofluidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
