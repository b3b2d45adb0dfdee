"""Experiment configuration, multi-run statistics and report files.

Config files are flat ``key = value`` text with ``#`` comments.  Run r of
an experiment uses seed ``base_seed + r``; per-run seeds are split into
independent simulation/initialization streams inside the solver.  Runs
whose training diverges are recorded as NC and excluded from statistics.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .grid import make_uniform_grid
from .problems import ProblemSpec, build_problem
from .schemes import SchemeKind, SolveResult, TrainConfig, TrainingDiverged, solve


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    problem: str
    dim: int = 1
    scheme: str = "dbdp1"
    n_steps: int | None = None  # None: problem preset
    runs: int = 10
    base_seed: int = 0
    out_dir: str = "out"
    driver_variant: str = "consistent"
    train: TrainConfig = field(default_factory=TrainConfig)
    workers: int = 1

    def build(self) -> ProblemSpec:
        return build_problem(self.problem, self.dim, driver_variant=self.driver_variant)

    def resolve_n_steps(self, problem: ProblemSpec) -> int:
        return self.n_steps if self.n_steps is not None else problem.default_n_steps

    def validate(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        try:
            scheme = SchemeKind(self.scheme)
        except ValueError:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from None
        problem = self.build()
        if scheme.reflected and not problem.has_obstacle:
            raise ConfigError(f"scheme {self.scheme} requires an obstacle problem")
        if scheme is SchemeKind.RDBDPBIS and problem.z_dependent:
            raise ConfigError("rdbdpbis requires a problem whose driver does not use z")


# keys accepted in config files, mapped to (owner, attribute, parser)
def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_TOP_KEYS = {
    "problem": str,
    "dim": int,
    "scheme": str,
    "n_steps": int,
    "runs": int,
    "base_seed": int,
    "out_dir": str,
    "driver_variant": str,
    "workers": int,
}
_TRAIN_KEYS = {
    "batch_size": int,
    "iters_first": int,
    "iters_later": int,
    "lr_first": float,
    "lr_later": float,
    "lr_decay": float,
    "lr_min": float,
    "check_every": int,
    "plateau_rtol": float,
    "holdout_factor": int,
    "stencil_step": float,
    "gradient_mode": str,
    "sample_mode": str,
    "pool_size": int,
    "hidden_layers": int,
    "width": int,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key-value format, validating keys and types."""
    top: dict = {}
    train: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _TOP_KEYS:
            parser, target = _TOP_KEYS[key], top
        elif key in _TRAIN_KEYS:
            parser, target = _TRAIN_KEYS[key], train
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in target:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            target[key] = parser(value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: bad value {value!r} for {key!r} (expected {parser.__name__})"
            ) from None
    if "problem" not in top:
        raise ConfigError("missing required key 'problem'")
    try:
        config = ExperimentConfig(train=TrainConfig(**train), **top)
        config.validate()
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return config


def serialize_config(config: ExperimentConfig) -> str:
    """Inverse of parse_config: parse(serialize(c)) == c."""
    lines = []
    for key in _TOP_KEYS:
        value = getattr(config, key)
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    defaults = TrainConfig()
    for key in _TRAIN_KEYS:
        value = getattr(config.train, key)
        if value is None or value == getattr(defaults, key):
            continue
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# execution


@dataclass
class RunRecord:
    run_id: int
    u0: float
    z0_norm: float
    seconds: float
    diverged: bool


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    reference_value: float | None
    reference_note: str
    n_steps: int

    @property
    def converged(self) -> list:
        return [r for r in self.records if not r.diverged]

    @property
    def nc_count(self) -> int:
        return sum(r.diverged for r in self.records)

    @property
    def mean(self) -> float | None:
        vals = [r.u0 for r in self.converged]
        return float(np.mean(vals)) if vals else None

    @property
    def std(self) -> float | None:
        """Sample standard deviation; None for fewer than two runs."""
        vals = [r.u0 for r in self.converged]
        return float(np.std(vals, ddof=1)) if len(vals) >= 2 else None


def _single_run(config: ExperimentConfig, run_id: int, keep_networks: bool = False):
    problem = config.build()
    grid = make_uniform_grid(problem.horizon, config.resolve_n_steps(problem))
    scheme = SchemeKind(config.scheme)
    seed = config.base_seed + run_id
    try:
        result = solve(problem, scheme, grid, config.train, seed)
    except TrainingDiverged:
        return RunRecord(run_id, math.nan, math.nan, math.nan, diverged=True), None
    record = RunRecord(
        run_id=run_id,
        u0=result.u0,
        z0_norm=float(np.linalg.norm(result.z0)),
        seconds=result.seconds,
        diverged=False,
    )
    return record, (result if keep_networks else None)


def run_experiment(config: ExperimentConfig, keep_last_result: bool = False):
    """Execute ``config.runs`` independent solves and collect statistics.

    Returns the report, and the last converged SolveResult when
    ``keep_last_result`` (for plot-data emission without retraining).
    """
    config.validate()
    problem = config.build()
    records = []
    last_result: SolveResult | None = None
    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_single_run, config, r) for r in range(config.runs)]
            records = [f.result()[0] for f in futures]
        if keep_last_result:
            # recompute the last converged run in-process to keep its networks
            done = [r for r in records if not r.diverged]
            if done:
                _, last_result = _single_run(config, done[-1].run_id, keep_networks=True)
    else:
        for r in range(config.runs):
            record, result = _single_run(config, r, keep_networks=keep_last_result)
            records.append(record)
            if result is not None:
                last_result = result
    report = ExperimentReport(
        config=config,
        records=records,
        reference_value=problem.reference_value,
        reference_note=problem.reference_note,
        n_steps=config.resolve_n_steps(problem),
    )
    if keep_last_result:
        return report, last_result
    return report


# ---------------------------------------------------------------------------
# persistence


def _fmt(value: float) -> str:
    """Decimal text with 8 significant digits; empty for NaN."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return format(value, ".8g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ExperimentReport, out_dir: str) -> dict:
    """Write runs.csv and summary.json; returns the written paths.

    Summary statistics are recomputed from the 8-significant-digit values
    that land in runs.csv, so rereading the CSV reproduces them exactly.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        rows = ["run_id,u0_estimate,z0_norm,seconds,diverged"]
        for r in report.records:
            rows.append(
                f"{r.run_id},{_fmt(r.u0)},{_fmt(r.z0_norm)},{_fmt(r.seconds)},"
                f"{'true' if r.diverged else 'false'}"
            )
        csv_path = os.path.join(out_dir, "runs.csv")
        _atomic_write(csv_path, "\n".join(rows) + "\n")

        rounded = [float(_fmt(r.u0)) for r in report.converged]
        summary = {
            "problem": report.config.problem,
            "scheme": report.config.scheme,
            "dim": report.config.dim,
            "n_steps": report.n_steps,
            "runs": report.config.runs,
            "mean": float(np.mean(rounded)) if rounded else None,
            "std": float(np.std(rounded, ddof=1)) if len(rounded) >= 2 else None,
            "std_flag": "undefined for a single run" if len(rounded) == 1 else None,
            "reference": float(_fmt(report.reference_value))
            if report.reference_value is not None
            else None,
            "reference_note": report.reference_note,
            "nc_count": report.nc_count,
        }
        summary_path = os.path.join(out_dir, "summary.json")
        _atomic_write(summary_path, json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        raise IOError(f"failed writing report under {out_dir!r}: {exc}") from exc
    return {"runs": csv_path, "summary": summary_path}


# ---------------------------------------------------------------------------
# figure data


def emit_plot_data(
    result: SolveResult,
    step_index: int,
    out_path: str,
    axis: int = 0,
    lo: float = -1.0,
    hi: float = 3.0,
    points: int = 200,
    grid2d: bool = False,
) -> str:
    """CSV slice of the trained solution (and the analytic one if known).

    1-d mode varies coordinate ``axis`` over [lo, hi] holding the others
    at x0.  ``grid2d`` writes a points x points error surface over the
    first two coordinates instead.
    """
    from .schemes import evaluate_solution

    problem = result.problem
    if problem is None:
        raise ValueError("result carries no problem; rebuild it before plotting")
    t = result.grid.knots[step_index]
    if grid2d:
        if problem.dim < 2:
            raise ValueError("grid2d needs a problem of dimension >= 2")
        axes_vals = np.linspace(lo, hi, points)
        rows = ["x1,x2,u_estimate,u_analytic,error"]
        for a in axes_vals:
            x = np.tile(problem.x0, (points, 1))
            x[:, 0] = a
            x[:, 1] = axes_vals
            u, _ = evaluate_solution(result, step_index, x)
            ua = problem.analytic_u(t, x) if problem.analytic_u else np.full(points, np.nan)
            for b, ue, uv in zip(axes_vals, u, ua):
                rows.append(f"{a:.8g},{b:.8g},{ue:.8g},{_fmt(uv)},{_fmt(ue - uv)}")
    else:
        xs = np.linspace(lo, hi, points)
        x = np.tile(problem.x0, (points, 1))
        x[:, axis] = xs
        u, z = evaluate_solution(result, step_index, x)
        if problem.analytic_u is not None:
            ua = problem.analytic_u(t, x)
            za = problem.analytic_z(t, x)[:, axis]
        else:
            ua = np.full(points, np.nan)
            za = np.full(points, np.nan)
        rows = ["x,u_estimate,u_analytic,z_estimate,z_analytic"]
        for k in range(points):
            zk = z[k, axis] if np.ndim(z) == 2 else float(z[k])
            rows.append(f"{xs[k]:.8g},{u[k]:.8g},{_fmt(ua[k])},{zk:.8g},{_fmt(za[k])}")
    try:
        _atomic_write(out_path, "\n".join(rows) + "\n")
    except OSError as exc:
        raise IOError(f"failed writing plot data to {out_path!r}: {exc}") from exc
    return out_path


def read_runs_csv(path: str) -> list:
    """Parse runs.csv back into RunRecord values."""
    records = []
    with open(path) as handle:
        header = handle.readline().strip()
        if header != "run_id,u0_estimate,z0_norm,seconds,diverged":
            raise IOError(f"unexpected runs.csv header in {path!r}")
        for line in handle:
            run_id, u0, z0, secs, div = line.strip().split(",")
            records.append(
                RunRecord(
                    run_id=int(run_id),
                    u0=float(u0) if u0 else math.nan,
                    z0_norm=float(z0) if z0 else math.nan,
                    seconds=float(secs) if secs else math.nan,
                    diverged=div == "true",
                )
            )
    return records
