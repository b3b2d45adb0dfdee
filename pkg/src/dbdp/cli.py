"""Command-line entry point.

Subcommands:
  solve     single training run, prints the u(0, x0) estimate
  bench     R-run experiment with statistics, writes runs.csv + summary.json
  plotdata  CSV slice of a trained solution for external plotting
  oracle    reference values and self-convergence diagnostics

Exit codes: 0 success, 1 usage/config error, 2 all runs diverged, 3 I/O
error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .grid import make_uniform_grid
from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_plot_data,
    parse_config,
    run_experiment,
    write_report,
)
from .oracles import american_price_1d, bs_european_put, reduce_geometric_to_1d
from .problems import build_problem
from .schemes import SchemeKind, TrainConfig, TrainingDiverged, solve


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file (see README)")
    parser.add_argument("--problem", choices=["simple", "complex", "american"])
    parser.add_argument("--dim", type=int, help="state dimension (default 1)")
    parser.add_argument(
        "--scheme", choices=[k.value for k in SchemeKind], help="default dbdp1"
    )
    parser.add_argument("--n-steps", type=int, help="time steps (default: problem preset)")
    parser.add_argument("--seed", type=int, dest="base_seed", help="base seed (default 0)")
    parser.add_argument(
        "--driver-variant", choices=["consistent", "verbatim"], help="default consistent"
    )
    parser.add_argument("--batch-size", type=int, help="minibatch size (default 1000)")
    parser.add_argument("--iters-first", type=int, help="SGD iterations, last step (default 4000)")
    parser.add_argument("--iters-later", type=int, help="SGD iterations, warm steps (default 800)")
    parser.add_argument("--width", type=int, help="hidden width (default d + 10)")
    parser.add_argument(
        "--gradient-mode", choices=["stencil", "exact"], help="DBDP2 gradient (default stencil)"
    )
    parser.add_argument(
        "--sample-mode", choices=["resample", "pool"], help="minibatch source (default resample)"
    )
    parser.add_argument("--out-dir", help="output directory (default out)")


_TRAIN_FLAGS = (
    "batch_size",
    "iters_first",
    "iters_later",
    "width",
    "gradient_mode",
    "sample_mode",
)
_TOP_FLAGS = ("problem", "dim", "scheme", "n_steps", "base_seed", "driver_variant", "out_dir")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file first, then flag overrides on top."""
    if args.config:
        try:
            with open(args.config) as handle:
                config = parse_config(handle.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    else:
        if args.problem is None:
            raise ConfigError("either --config or --problem is required")
        config = ExperimentConfig(problem=args.problem)
    for key in _TOP_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    train_overrides = {
        key: getattr(args, key) for key in _TRAIN_FLAGS if getattr(args, key, None) is not None
    }
    if train_overrides:
        config.train = dataclasses.replace(config.train, **train_overrides)
    runs = getattr(args, "runs", None)
    if runs is not None:
        config.runs = runs
    workers = getattr(args, "workers", None)
    if workers is not None:
        config.workers = workers
    config.validate()
    return config


def _cmd_solve(args) -> int:
    config = _build_config(args)
    problem = config.build()
    grid = make_uniform_grid(problem.horizon, config.resolve_n_steps(problem))
    try:
        result = solve(problem, SchemeKind(config.scheme), grid, config.train, config.base_seed)
    except TrainingDiverged as exc:
        print(f"NC: {exc}", file=sys.stderr)
        return 2
    print(f"problem   {problem.name} d={problem.dim} N={grid.n_steps}")
    print(f"scheme    {config.scheme}")
    print(f"u0        {result.u0:.8g}")
    print(f"z0_norm   {float(np.linalg.norm(result.z0)):.8g}")
    if problem.reference_value is not None:
        err = result.u0 - problem.reference_value
        print(f"reference {problem.reference_value:.8g}  (error {err:+.3g})")
    print(f"seconds   {result.seconds:.8g}")
    if args.save:
        try:
            with open(args.save, "w") as handle:
                json.dump(result.to_dict(), handle)
        except OSError as exc:
            print(f"error: cannot write {args.save!r}: {exc}", file=sys.stderr)
            return 3
        print(f"saved     {args.save}")
    return 0


def _cmd_bench(args) -> int:
    config = _build_config(args)
    report = run_experiment(config)
    try:
        paths = write_report(report, config.out_dir)
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for record in report.records:
        status = "NC" if record.diverged else f"{record.u0:.8g}"
        print(f"run {record.run_id}: {status}")
    if report.mean is None:
        print("all runs diverged", file=sys.stderr)
        return 2
    std = f"{report.std:.8g}" if report.std is not None else "n/a (single run)"
    print(f"mean {report.mean:.8g}  std {std}  nc {report.nc_count}")
    if report.reference_value is not None:
        print(f"reference {report.reference_value:.8g}  ({report.reference_note})")
    print(f"wrote {paths['runs']} and {paths['summary']}")
    return 0


def _cmd_plotdata(args) -> int:
    config = _build_config(args)
    config.runs = 1
    report, result = run_experiment(config, keep_last_result=True)
    if result is None:
        print("all runs diverged", file=sys.stderr)
        return 2
    n = result.grid.n_steps
    index = args.time_index if args.time_index is not None else n // 2
    if not 0 <= index <= n:
        print(f"error: time index {index} outside 0..{n}", file=sys.stderr)
        return 1
    try:
        path = emit_plot_data(
            result,
            index,
            args.out,
            axis=args.axis,
            lo=args.lo,
            hi=args.hi,
            points=args.points,
            grid2d=args.grid2d,
        )
    except (IOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path} (t = {result.grid.knots[index]:.6g}, index {index})")
    return 0


def _cmd_oracle(args) -> int:
    dims = args.dims or [1, 5, 10, 20, 40]
    print("geometric-basket American put, strike 1, rate 0.05, vol 0.2, T = 1")
    print("d,lattice_price,european_lattice,european_bs,self_convergence")
    for d in dims:
        params = reduce_geometric_to_1d(d)
        price = american_price_1d(params, args.lattice_steps)
        finer = american_price_1d(params, 2 * args.lattice_steps)
        euro_params = dataclasses.replace(params, american=False)
        euro = american_price_1d(euro_params, args.lattice_steps)
        bs = bs_european_put(
            params.spot, params.strike, params.rate, params.growth_rate,
            params.vol_eff, params.horizon,
        )
        print(f"{d},{price:.8g},{euro:.8g},{bs:.8g},{abs(finer - price):.3g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbdp",
        description="Backward deep-learning schemes for semilinear PDEs and obstacle problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single training run")
    _add_common(p_solve)
    p_solve.add_argument("--save", help="write the trained solution as JSON")
    p_solve.set_defaults(func=_cmd_solve)

    p_bench = sub.add_parser("bench", help="multi-run experiment with statistics")
    _add_common(p_bench)
    p_bench.add_argument("--runs", type=int, help="independent runs R (default 10)")
    p_bench.add_argument("--workers", type=int, help="parallel run processes (default 1)")
    p_bench.set_defaults(func=_cmd_bench)

    p_plot = sub.add_parser("plotdata", help="CSV slice of a trained solution")
    _add_common(p_plot)
    p_plot.add_argument("--out", default="plot.csv", help="output CSV path")
    p_plot.add_argument("--time-index", type=int, help="grid index (default N/2)")
    p_plot.add_argument("--axis", type=int, default=0, help="varied coordinate (default 0)")
    p_plot.add_argument("--lo", type=float, default=-1.0)
    p_plot.add_argument("--hi", type=float, default=3.0)
    p_plot.add_argument("--points", type=int, default=200)
    p_plot.add_argument("--grid2d", action="store_true", help="2-d error surface instead of a slice")
    p_plot.set_defaults(func=_cmd_plotdata)

    p_oracle = sub.add_parser("oracle", help="lattice reference values and cross-checks")
    p_oracle.add_argument("--dims", type=int, nargs="*", help="dimensions (default 1 5 10 20 40)")
    p_oracle.add_argument("--lattice-steps", type=int, default=5000)
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
