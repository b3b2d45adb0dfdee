"""Backward deep-learning schemes for semilinear PDEs and obstacle problems."""

from .grid import TimeGrid, make_uniform_grid
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    emit_plot_data,
    parse_config,
    run_experiment,
    serialize_config,
    write_report,
)
from .problems import ProblemSpec, build_problem
from .schemes import (
    SchemeKind,
    SolveResult,
    TrainConfig,
    TrainingDiverged,
    evaluate_solution,
    solve,
)
from .sde import SdeModel, StepSampler, euler_paths, sample_increments

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "ProblemSpec",
    "SchemeKind",
    "SdeModel",
    "SolveResult",
    "StepSampler",
    "TimeGrid",
    "TrainConfig",
    "TrainingDiverged",
    "build_problem",
    "emit_plot_data",
    "euler_paths",
    "evaluate_solution",
    "make_uniform_grid",
    "parse_config",
    "run_experiment",
    "sample_increments",
    "serialize_config",
    "solve",
    "write_report",
]

__version__ = "0.1.0"
