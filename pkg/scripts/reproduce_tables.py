#!/usr/bin/env python3
"""Reproduce the benchmark tables at desk scale.

Each entry runs a multi-seed experiment and prints mean / std / reference
alongside the written runs.csv. Select entries by name, e.g.:

    python3 scripts/reproduce_tables.py simple-d1 american-d1-n40
    python3 scripts/reproduce_tables.py --list
    python3 scripts/reproduce_tables.py --all --out-root out/tables
"""
from __future__ import annotations

import argparse
import sys
import time

from dbdp import ExperimentConfig, TrainConfig, run_experiment, write_report

# name -> (problem, dim, scheme, n_steps, runs, train overrides)
# The d=1 runs double the minibatch: at half the reference resolution
# (N=120 vs 240) this keeps the total sample budget and halves the
# per-step regression noise amplified by the quadratic driver.
TABLES = {
    "simple-d1": ("simple", 1, "dbdp1", 120, 5, {"batch_size": 2000}),
    "simple-d1-dbdp2": ("simple", 1, "dbdp2", 120, 5, {"batch_size": 2000}),
    "simple-d5": ("simple", 5, "dbdp1", 120, 5, {}),
    "simple-d10": ("simple", 10, "dbdp1", 60, 3, {}),
    "simple-d20": ("simple", 20, "dbdp1", 60, 3, {}),
    "complex-d1": ("complex", 1, "dbdp1", 120, 5, {}),
    "complex-d2": ("complex", 2, "dbdp1", 120, 5, {}),
    "complex-d10": ("complex", 10, "dbdp1", 60, 3, {}),
    "american-d1-n10": ("american", 1, "rdbdp", 10, 5, {}),
    "american-d1-n40": ("american", 1, "rdbdp", 40, 5, {}),
    "american-d5-n10": ("american", 5, "rdbdp", 10, 5, {}),
    "american-d1-bis-n40": ("american", 1, "rdbdpbis", 40, 5, {}),
}


def run_entry(name: str, out_root: str, workers: int) -> None:
    problem, dim, scheme, n_steps, runs, train_overrides = TABLES[name]
    config = ExperimentConfig(
        problem=problem,
        dim=dim,
        scheme=scheme,
        n_steps=n_steps,
        runs=runs,
        out_dir=f"{out_root}/{name}",
        workers=workers,
        train=TrainConfig(**train_overrides),
    )
    start = time.perf_counter()
    report = run_experiment(config)
    write_report(report, config.out_dir)
    elapsed = time.perf_counter() - start
    mean = "NC" if report.mean is None else f"{report.mean:.6f}"
    std = f"{report.std:.6f}" if report.std is not None else "-"
    ref = f"{report.reference_value:.6f}" if report.reference_value is not None else "-"
    gap = (
        f"{report.mean - report.reference_value:+.4f}"
        if report.mean is not None and report.reference_value is not None
        else "-"
    )
    print(
        f"{name:22s} mean {mean}  std {std}  ref {ref}  gap {gap}"
        f"  nc {report.nc_count}  [{elapsed:.0f}s]"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("names", nargs="*", help="table entries to run")
    parser.add_argument("--all", action="store_true", help="run every entry")
    parser.add_argument("--list", action="store_true", help="list entries and exit")
    parser.add_argument("--out-root", default="out/tables")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    if args.list:
        for name, spec in TABLES.items():
            print(f"{name:22s} {spec}")
        return 0
    names = list(TABLES) if args.all else args.names
    if not names:
        parser.error("give entry names, --all, or --list")
    for name in names:
        if name not in TABLES:
            parser.error(f"unknown entry {name!r}; see --list")
    for name in names:
        run_entry(name, args.out_root, args.workers)
    return 0


if __name__ == "__main__":
    sys.exit(main())
