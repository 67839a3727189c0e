#!/usr/bin/env python3
"""Compare the closed-form multiply count with the instrumented count.

    python3 scripts/opcount_sweep.py                 # L doubling sweep at the benchmark config
    python3 scripts/opcount_sweep.py --d 8 16 32     # also vary width
"""
import argparse
import sys

from deformtime.benchmarks import SEASONAL_MODEL
from deformtime.model import DeformTime, ModelConfig, measured_op_count, predicted_op_count


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--L", type=int, nargs="+", default=[14, 28, 56, 112])
    ap.add_argument("--d", type=int, nargs="+", default=[SEASONAL_MODEL["d"]])
    ap.add_argument("--ell", type=int, default=SEASONAL_MODEL["ell"])
    args = ap.parse_args(argv)

    print(f"{'L':>5} {'d':>4} {'predicted':>12} {'measured':>12} {'ratio':>6}")
    for d in args.d:
        prev = None
        for L in args.L:
            cfg = ModelConfig(**{**SEASONAL_MODEL, "L": L, "d": d, "ell": args.ell,
                                 "r_per_layer": [1, args.ell]})
            p, m = predicted_op_count(cfg), measured_op_count(DeformTime(cfg))
            growth = "" if prev is None else f"  growth: formula x{p / prev[0]:.2f}, measured x{m / prev[1]:.2f}"
            print(f"{L:5d} {d:4d} {p:12d} {m:12d} {m / p:6.3f}{growth}")
            prev = (p, m)
    return 0


if __name__ == "__main__":
    sys.exit(main())
