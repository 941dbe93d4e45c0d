#!/usr/bin/env python3
"""Map the small-mass regime: F-monotonicity and fitted rates per initial mass."""
import argparse
import math

import numpy as np

from chemofluid.config import load_config
from chemofluid.harness import FIT_QUANTITIES, sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--masses", type=float, nargs="+",
                    default=list(np.round(np.geomspace(0.01, 2.0, 8), 6)))
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args(argv)

    report = sweep(load_config(args.config), args.masses, workers=args.workers)
    head = ["mass", "status", "F-mono"] + [q for q in FIT_QUANTITIES]
    print("  ".join(f"{h:>11}" for h in head))
    for r in report.rows:
        rates = [r.rates.get(q) for q in FIT_QUANTITIES]
        cells = [f"{r.mass:11.4g}", f"{r.status:>11}", f"{str(r.lyapunov_monotone):>11}"]
        cells += [f"{x:11.4g}" if x is not None and math.isfinite(x) else f"{'-':>11}" for x in rates]
        print("  ".join(cells))
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
