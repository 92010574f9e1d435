"""Amplitude sweep: classification and outcome across the stable/unstable transition.

Thin wrapper over the sweep subcommand with a log-spaced amplitude list.
"""

import argparse
import sys

import numpy as np

from viscowell.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="base config (defaults if omitted)")
    ap.add_argument("--out", default="phase_sweep")
    ap.add_argument("--lo", type=float, default=0.1)
    ap.add_argument("--hi", type=float, default=1e6)
    ap.add_argument("--count", type=int, default=15)
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()

    amps = np.geomspace(args.lo, args.hi, args.count)
    argv = ["sweep", "--out", args.out, "--jobs", str(args.jobs),
            "--amplitudes", ",".join(repr(float(A)) for A in [0.0, *amps])]
    if args.config:
        argv += ["--config", args.config]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
