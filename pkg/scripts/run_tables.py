"""Run the three Cobb-Douglas benchmark cases and write one CSV per case.

The full configurations use n = m = 100, eight samples and a ten-second
budget per run, so the bounded case alone takes about half an hour on one
core. ``--quick`` swaps in the small configurations (n = m = 10, 2000
iterations), which finish in a few minutes.

    python scripts/run_tables.py --quick --outdir results
"""

from __future__ import annotations

import argparse
import json
import logging
import time
from pathlib import Path

from fpqsm.bench import ExperimentSpec, emit, format_table, run_experiment
from fpqsm.cli import CONFIG_DIR

CASES = ("unbounded", "bounded", "gcfs")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="use the small configurations")
    ap.add_argument("--cases", default=",".join(CASES), help="comma-separated subset of " + ",".join(CASES))
    ap.add_argument("--samples", type=int, help="override the number of samples")
    ap.add_argument("--outdir", default=".", help="directory for the CSV files")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    suffix = "small" if args.quick else "full"
    for case in args.cases.split(","):
        cfg = json.loads((CONFIG_DIR / f"{case}-{suffix}.json").read_text())
        if args.samples is not None:
            cfg["samples"] = args.samples
        spec = ExperimentSpec.from_dict(cfg)
        t0 = time.perf_counter()
        rows = run_experiment(spec)
        path = outdir / f"{case}-{suffix}.csv"
        emit(rows, "csv", path)
        print(f"\n{case} (n={spec.n}, m={spec.m}, {time.perf_counter() - t0:.0f} s) -> {path}")
        print(format_table(rows))


if __name__ == "__main__":
    main()
