#!/usr/bin/env python3
"""Emit CSV slices of trained solutions for external plotting.

Trains one run per figure (a few minutes each on one CPU) and writes:
  out/figures/simple_d1_t1.csv      u and z vs x at t = 1 (d = 1)
  out/figures/complex_d2_err.csv    error surface at t = 0.5 (d = 2)
"""
from __future__ import annotations

import os
import sys

from dbdp import ExperimentConfig, emit_plot_data, run_experiment


def main() -> int:
    out = "out/figures"
    os.makedirs(out, exist_ok=True)

    config = ExperimentConfig(problem="simple", dim=1, scheme="dbdp1", runs=1)
    report, result = run_experiment(config, keep_last_result=True)
    if result is None:
        print("simple d=1 run diverged", file=sys.stderr)
        return 2
    # t = 1 is the midpoint of the d=1 horizon T = 2
    index = result.grid.n_steps // 2
    path = emit_plot_data(result, index, f"{out}/simple_d1_t1.csv", lo=-1.0, hi=3.0)
    print(f"wrote {path}")

    config = ExperimentConfig(problem="complex", dim=2, scheme="dbdp1", runs=1)
    report, result = run_experiment(config, keep_last_result=True)
    if result is None:
        print("complex d=2 run diverged", file=sys.stderr)
        return 2
    index = result.grid.n_steps // 2
    path = emit_plot_data(
        result, index, f"{out}/complex_d2_err.csv", lo=-1.0, hi=2.0, points=60, grid2d=True
    )
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
