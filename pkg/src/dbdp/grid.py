"""Uniform time discretization of [0, T]."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = T."""

    horizon: float
    n_steps: int
    knots: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.horizon == other.horizon and self.n_steps == other.n_steps


def make_uniform_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build the uniform grid with t_i = i * T / N."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    knots = np.linspace(0.0, float(horizon), n_steps + 1)
    knots.flags.writeable = False
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps), knots=knots)
