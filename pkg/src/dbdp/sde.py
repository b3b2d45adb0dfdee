"""Forward process: Brownian increments and Euler-Maruyama paths.

All sampling goes through counter-based Philox generators so that a given
seed yields bit-identical draws regardless of how work is partitioned.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DriftFn = Callable[[float, np.ndarray], np.ndarray]
DiffusionFn = Callable[[float, np.ndarray], np.ndarray]


def philox(seed) -> np.random.Generator:
    """Deterministic generator from an integer seed or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SdeModel:
    """Forward diffusion dX = mu(t, X) dt + sigma(t, X) dW.

    ``diagonal`` declares that ``sigma`` returns the diagonal of the
    diffusion matrix, shape (B, d), instead of full (B, d, d) matrices.
    Every benchmark problem here is of that form.  ``mu_const`` /
    ``sigma_const`` are set when the coefficients do not depend on (t, x),
    which lets samplers draw aggregated increments directly.
    """

    dim: int
    x0: np.ndarray
    mu: DriftFn
    sigma: DiffusionFn
    diagonal: bool = True
    mu_const: np.ndarray | None = None
    sigma_const: np.ndarray | None = None

    @classmethod
    def constant(cls, mu: np.ndarray, sigma_diag: np.ndarray, x0: np.ndarray) -> "SdeModel":
        """Model with constant drift vector and diagonal diffusion."""
        mu = np.asarray(mu, dtype=float)
        sigma_diag = np.asarray(sigma_diag, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        d = x0.shape[0]
        if mu.shape != (d,) or sigma_diag.shape != (d,):
            raise ValueError("mu, sigma_diag and x0 must share the dimension")
        return cls(
            dim=d,
            x0=x0,
            mu=lambda t, x: np.broadcast_to(mu, x.shape),
            sigma=lambda t, x: np.broadcast_to(sigma_diag, x.shape),
            diagonal=True,
            mu_const=mu,
            sigma_const=sigma_diag,
        )

    @property
    def is_constant(self) -> bool:
        return self.mu_const is not None and self.sigma_const is not None


def sample_increments(grid, d: int, batch: int, seed) -> np.ndarray:
    """Brownian increments, shape (batch, N, d), i.i.d. N(0, dt I) per step."""
    if batch < 1 or d < 1:
        raise ValueError("batch and d must be >= 1")
    rng = philox(seed)
    steps = np.diff(grid.knots)
    out = rng.standard_normal((batch, grid.n_steps, d))
    out *= np.sqrt(steps)[None, :, None]
    return out


def euler_paths(model: SdeModel, grid, increments: np.ndarray) -> np.ndarray:
    """Euler-Maruyama recursion, returning states of shape (B, N+1, d)."""
    batch, n_steps, d = increments.shape
    if d != model.dim:
        raise ValueError(f"increment dimension {d} != model dimension {model.dim}")
    if n_steps != grid.n_steps:
        raise ValueError(f"increment steps {n_steps} != grid steps {grid.n_steps}")
    x = np.empty((batch, n_steps + 1, d))
    x[:, 0, :] = model.x0
    for i in range(n_steps):
        t_i = grid.knots[i]
        dt_i = grid.knots[i + 1] - grid.knots[i]
        cur = x[:, i, :]
        drift = model.mu(t_i, cur)
        if model.diagonal:
            diff = model.sigma(t_i, cur) * increments[:, i, :]
        else:
            diff = np.einsum("bij,bj->bi", model.sigma(t_i, cur), increments[:, i, :])
        x[:, i + 1, :] = cur + drift * dt_i + diff
    return x


@dataclass
class StepBatch:
    """Training triple (X_{t_i}, X_{t_{i+1}}, dW_{t_i}) for one time step."""

    x: np.ndarray
    x_next: np.ndarray
    dw: np.ndarray


class StepSampler:
    """Draws fresh (X_{t_i}, X_{t_{i+1}}, dW_{t_i}) minibatches.

    For constant-coefficient models X_{t_i} is a deterministic affine map of
    the accumulated Brownian increment, so the Euler state at t_i can be
    drawn in one shot instead of stepping i times; the final step to
    t_{i+1} always uses the one-step Euler recursion.
    """

    def __init__(self, model: SdeModel, grid, step_index: int, rng: np.random.Generator):
        if not 0 <= step_index < grid.n_steps:
            raise ValueError(f"step index {step_index} out of range")
        self.model = model
        self.grid = grid
        self.i = step_index
        self.rng = rng

    def sample(self, batch: int) -> StepBatch:
        model, grid, i = self.model, self.grid, self.i
        d = model.dim
        t_i = grid.knots[i]
        dt = grid.knots[i + 1] - grid.knots[i]
        if model.is_constant:
            if i == 0:
                x = np.broadcast_to(model.x0, (batch, d)).copy()
            else:
                w = self.rng.standard_normal((batch, d)) * np.sqrt(t_i)
                x = model.x0 + model.mu_const * t_i + model.sigma_const * w
        else:
            incr = self.rng.standard_normal((batch, i, d)) * np.sqrt(grid.dt)
            x = np.broadcast_to(model.x0, (batch, d)).copy()
            for k in range(i):
                t_k = grid.knots[k]
                if model.diagonal:
                    diff = model.sigma(t_k, x) * incr[:, k, :]
                else:
                    diff = np.einsum("bij,bj->bi", model.sigma(t_k, x), incr[:, k, :])
                x = x + model.mu(t_k, x) * grid.dt + diff
        dw = self.rng.standard_normal((batch, d)) * np.sqrt(dt)
        if model.diagonal:
            diff = model.sigma(t_i, x) * dw
        else:
            diff = np.einsum("bij,bj->bi", model.sigma(t_i, x), dw)
        x_next = x + model.mu(t_i, x) * dt + diff
        return StepBatch(x=x, x_next=x_next, dw=dw)


class PooledStepSampler:
    """Fixed-pool variant: presimulates a pool and resamples minibatch rows."""

    def __init__(self, base: StepSampler, pool_size: int, rng: np.random.Generator):
        self.pool = base.sample(pool_size)
        self.rng = rng

    def sample(self, batch: int) -> StepBatch:
        idx = self.rng.integers(0, self.pool.x.shape[0], size=batch)
        return StepBatch(x=self.pool.x[idx], x_next=self.pool.x_next[idx], dw=self.pool.dw[idx])
