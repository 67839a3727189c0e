#!/usr/bin/env python3
"""Seasonal leading-indicator benchmark: DeformTime vs persistence, optionally with ablations.

    python3 scripts/benchmark.py --seeds 0 1 2
    python3 scripts/benchmark.py --seeds 0 1 2 --variants full no_vdab no_tdab no_pvt no_nae no_pn
"""
import argparse
import json
import logging
import sys
import time

from deformtime.benchmarks import as_dict, seasonal_benchmark
from deformtime.training import ABLATIONS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--variants", nargs="+", default=["full"], choices=["full", *sorted(ABLATIONS)])
    ap.add_argument("--max-epochs", type=int, default=None)
    ap.add_argument("--out", default=None, help="write results as JSON lines here")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    overrides = {"max_epochs": args.max_epochs} if args.max_epochs else None
    rows = []
    t0 = time.process_time()
    for variant in args.variants:
        for seed in args.seeds:
            res = seasonal_benchmark(seed, variant, train_overrides=overrides)
            rows.append(as_dict(res))
            print(f"{variant:8s} seed={seed} mae={res.model_mae:.4f} persistence={res.persistence_mae:.4f} "
                  f"reduction={100 * res.reduction:5.1f}% best_epoch={res.best_epoch} cpu={res.seconds:.0f}s",
                  flush=True)
    print(f"total CPU {time.process_time() - t0:.0f}s")
    if args.out:
        with open(args.out, "w") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
