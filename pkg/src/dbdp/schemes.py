"""Backward dynamic-programming schemes DBDP1, DBDP2, RDBDP and RDBDPbis.

One regression problem per time step, solved by minibatch Adam on the
scheme's quadratic loss, walking backward from the terminal condition
with warm-started parameters.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import TimeGrid
from .nn import AdamState, Network, NonFiniteLoss, adam_step, fit_normalizer, loss_param_gradient
from .problems import ProblemSpec
from .sde import PooledStepSampler, StepSampler, philox


class SchemeKind(str, enum.Enum):
    DBDP1 = "dbdp1"
    DBDP2 = "dbdp2"
    RDBDP = "rdbdp"
    RDBDPBIS = "rdbdpbis"

    @property
    def reflected(self) -> bool:
        return self in (SchemeKind.RDBDP, SchemeKind.RDBDPBIS)

    @property
    def has_z_network(self) -> bool:
        return self in (SchemeKind.DBDP1, SchemeKind.RDBDP)


@dataclass
class TrainConfig:
    """Per-timestep SGD settings; defaults follow the benchmark protocol."""

    batch_size: int = 1000
    iters_first: int = 4000
    iters_later: int = 800
    lr_first: float = 1e-2
    lr_later: float = 1e-3
    lr_decay: float = 0.1
    lr_min: float = 1e-5
    check_every: int = 50
    plateau_rtol: float = 1e-3
    holdout_factor: int = 10
    stencil_step: float = 1e-4
    gradient_mode: str = "stencil"  # DBDP2 gradient: "stencil" | "exact"
    sample_mode: str = "resample"  # "resample" | "pool"
    pool_size: int = 20000
    hidden_layers: int = 2
    width: int | None = None  # None means d + 10

    def __post_init__(self):
        if self.batch_size < 1 or self.check_every < 1:
            raise ValueError("batch_size and check_every must be >= 1")
        if not self.iters_first >= self.iters_later >= 0:
            raise ValueError("need iters_first >= iters_later >= 0")
        if min(self.lr_first, self.lr_later) <= 0:
            raise ValueError("learning rates must be positive")
        if self.gradient_mode not in ("stencil", "exact"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.sample_mode not in ("resample", "pool"):
            raise ValueError(f"unknown sample mode {self.sample_mode!r}")

    def width_for(self, dim: int) -> int:
        return self.width if self.width is not None else dim + 10


@dataclass
class StepDiagnostics:
    iterations: int
    final_loss: float
    holdout_trace: list = field(default_factory=list)


@dataclass
class TrainedStep:
    u_net: Network
    z_net: Network | None
    diagnostics: StepDiagnostics


@dataclass
class SolveResult:
    scheme: SchemeKind
    grid: TimeGrid
    steps: list  # TrainedStep, index i = 0 .. N-1
    u0: float
    z0: np.ndarray
    seconds: float
    seed: int
    step_losses: list
    problem: ProblemSpec | None = None
    gradient_mode: str = "stencil"
    stencil_step: float = 1e-4

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "grid": {"horizon": self.grid.horizon, "n_steps": self.grid.n_steps},
            "u0": self.u0,
            "z0": self.z0.tolist(),
            "seconds": self.seconds,
            "seed": self.seed,
            "step_losses": self.step_losses,
            "gradient_mode": self.gradient_mode,
            "stencil_step": self.stencil_step,
            "problem": {
                "name": self.problem.name,
                "dim": self.problem.dim,
                "driver_variant": self.problem.driver_variant,
            }
            if self.problem is not None
            else None,
            "steps": [
                {
                    "u": s.u_net.to_dict(),
                    "z": s.z_net.to_dict() if s.z_net is not None else None,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, problem: ProblemSpec | None = None) -> "SolveResult":
        from .grid import make_uniform_grid

        steps = [
            TrainedStep(
                u_net=Network.from_dict(s["u"]),
                z_net=Network.from_dict(s["z"]) if s["z"] is not None else None,
                diagnostics=StepDiagnostics(iterations=0, final_loss=float("nan")),
            )
            for s in data["steps"]
        ]
        return cls(
            scheme=SchemeKind(data["scheme"]),
            grid=make_uniform_grid(data["grid"]["horizon"], data["grid"]["n_steps"]),
            steps=steps,
            u0=data["u0"],
            z0=np.asarray(data["z0"], dtype=float),
            seconds=data["seconds"],
            seed=data["seed"],
            step_losses=data["step_losses"],
            problem=problem,
            gradient_mode=data.get("gradient_mode", "stencil"),
            stencil_step=data.get("stencil_step", 1e-4),
        )


class TrainingDiverged(RuntimeError):
    def __init__(self, step_index: int, message: str):
        super().__init__(f"training diverged at step {step_index}: {message}")
        self.step_index = step_index


# ---------------------------------------------------------------------------
# losses
#
# Each loss accepts network views exposing forward / stencil_gradient /
# exact_gradient with identical semantics on the tape (TapedNet) and in
# plain numpy (EvalNet below), so training and checkpoint evaluation share
# one code path.


class EvalNet:
    """Numpy twin of TapedNet for loss evaluation without gradients."""

    def __init__(self, net: Network):
        self.net = net

    def forward(self, x):
        return self.net.forward(x)

    def stencil_gradient(self, x, h):
        return self.net.stencil_gradient(x, h)[:, 0, :]

    def exact_gradient(self, x):
        return self.net.input_gradient(x)[:, 0, :]


def f_step(driver, t, x, y, z, dt, dw):
    """One-step Euler transfer y - f(t, x, y, z) dt + z . dw, shape (B, 1)."""
    zdw = (z * dw).sum(axis=1, keepdims=True)
    return y - driver(t, x, y, z) * dt + zdw


def dbdp1_loss(u_view, z_view, batch, problem, t, dt, target):
    y = u_view.forward(batch.x)
    z = z_view.forward(batch.x)
    resid = target - f_step(problem.driver, t, batch.x, y, z, dt, batch.dw)
    return (resid**2.0).mean()


def dbdp2_loss(u_view, batch, problem, t, dt, target, stencil_step, gradient_mode="stencil"):
    y = u_view.forward(batch.x)
    if gradient_mode == "exact":
        grad = u_view.exact_gradient(batch.x)
    else:
        grad = u_view.stencil_gradient(batch.x, stencil_step)
    sig = problem.model.sigma(t, batch.x)
    if not problem.model.diagonal:
        raise NotImplementedError("DBDP2 is implemented for diagonal diffusions")
    z = grad * sig
    resid = target - f_step(problem.driver, t, batch.x, y, z, dt, batch.dw)
    return (resid**2.0).mean()


def rdbdpbis_loss(u_view, batch, problem, t, dt, target):
    if problem.z_dependent:
        raise ValueError("RDBDPbis requires a driver independent of z")
    y = u_view.forward(batch.x)
    zeros = np.zeros_like(batch.x)
    resid = target - y + problem.driver(t, batch.x, y, zeros) * dt
    return (resid**2.0).mean()


def reflected_next_value(u_func, obstacle, t_next) -> Callable:
    """Pointwise max of a value function against the obstacle at t_next."""
    if obstacle is None:
        return u_func
    return lambda x: np.maximum(u_func(x), obstacle(t_next, x))


# ---------------------------------------------------------------------------
# per-timestep training


def _make_networks(scheme, problem, config, warm_from, init_rng):
    d = problem.dim
    width = config.width_for(d)
    layers = config.hidden_layers + 1
    if warm_from is not None:
        u_net = Network.create(d, 1, layers, width, 0)
        u_net.copy_parameters_from(warm_from.u_net)
        z_net = None
        if scheme.has_z_network:
            z_net = Network.create(d, d, layers, width, 0)
            z_net.copy_parameters_from(warm_from.z_net)
        return u_net, z_net
    u_net = Network.create(d, 1, layers, width, int(init_rng.integers(2**63)))
    z_net = (
        Network.create(d, d, layers, width, int(init_rng.integers(2**63)))
        if scheme.has_z_network
        else None
    )
    return u_net, z_net


def _step_loss_fn(scheme, problem, config, batch, t, dt, target):
    if scheme in (SchemeKind.DBDP1, SchemeKind.RDBDP):
        return lambda u, z: dbdp1_loss(u, z, batch, problem, t, dt, target)
    if scheme is SchemeKind.DBDP2:
        return lambda u: dbdp2_loss(
            u, batch, problem, t, dt, target, config.stencil_step, config.gradient_mode
        )
    return lambda u: rdbdpbis_loss(u, batch, problem, t, dt, target)


def train_timestep(
    problem: ProblemSpec,
    grid: TimeGrid,
    step_index: int,
    next_value: Callable,
    scheme: SchemeKind,
    config: TrainConfig,
    seed_seq: np.random.SeedSequence,
    warm_from: TrainedStep | None = None,
) -> TrainedStep:
    """Fit the step-``step_index`` networks against the next value function.

    A fresh minibatch (or a pooled resample) of (X_{t_i}, X_{t_{i+1}},
    dW_{t_i}) is drawn per Adam iteration; a fixed held-out batch is
    scored every ``check_every`` iterations for plateau detection.  A cold
    start fits the input normalizer from the first batch and freezes it;
    warm starts inherit the previous step's normalizer along with the
    parameters.
    """
    ss_sim, ss_init, ss_hold, ss_pool = seed_seq.spawn(4)
    rng_sim = philox(ss_sim)
    t_i = grid.knots[step_index]
    dt = grid.knots[step_index + 1] - grid.knots[step_index]

    sampler = StepSampler(problem.model, grid, step_index, rng_sim)
    if config.sample_mode == "pool":
        sampler = PooledStepSampler(sampler, config.pool_size, philox(ss_pool))

    first_batch = sampler.sample(config.batch_size)
    holdout = StepSampler(problem.model, grid, step_index, philox(ss_hold)).sample(
        config.holdout_factor * config.batch_size
    )
    holdout_target = next_value(holdout.x_next)[:, None]

    u_net, z_net = _make_networks(scheme, problem, config, warm_from, philox(ss_init))
    if warm_from is None:
        normalizer = fit_normalizer(first_batch.x)
        # Floor the empirical std with the one-step diffusion scale so a
        # (near-)deterministic batch cannot inflate input-gradient scales
        # by 1/std.
        local_scale = np.abs(problem.model.sigma(t_i, first_batch.x)).mean(axis=0) * np.sqrt(dt)
        normalizer.std = np.maximum(normalizer.std, local_scale)
    else:
        # Keep the normalizer fitted at the terminal (widest-support) step:
        # refitting on the shrinking backward supports would stretch the
        # warm-started function — and its gradient — at every step.
        normalizer = warm_from.u_net.normalizer
    u_net.normalizer = normalizer
    if z_net is not None:
        z_net.normalizer = normalizer

    nets = [u_net] if z_net is None else [u_net, z_net]
    cold = warm_from is None
    max_iters = config.iters_first if cold else config.iters_later
    # Piecewise-constant learning-rate schedule; a plateau of the held-out
    # loss can only stop training inside the final (smallest-rate) phase.
    base = config.lr_first if cold else config.lr_later
    splits = [int(0.4 * max_iters), int(0.7 * max_iters)]
    rates = [max(base * config.lr_decay**j, config.lr_min) for j in range(len(splits) + 1)]
    final_phase_start = splits[-1] if splits else 0

    def rate_at(k):
        for edge, r in zip(splits, rates):
            if k < edge:
                return r
        return rates[-1]

    states = [AdamState.for_params(n.parameters(), rates[0]) for n in nets]

    def holdout_loss():
        views = [EvalNet(n) for n in nets]
        fn = _step_loss_fn(scheme, problem, config, holdout, t_i, dt, holdout_target)
        return float(fn(*views))

    trace: list[float] = []
    last_loss = float("nan")
    iterations = 0
    for k in range(max_iters):
        lr = rate_at(k)
        for state in states:
            state.learning_rate = lr
        batch = first_batch if k == 0 else sampler.sample(config.batch_size)
        target = next_value(batch.x_next)[:, None]
        fn = _step_loss_fn(scheme, problem, config, batch, t_i, dt, target)
        try:
            last_loss, grads = loss_param_gradient(nets, fn)
        except NonFiniteLoss as exc:
            raise TrainingDiverged(step_index, str(exc)) from exc
        for net, state, g in zip(nets, states, grads):
            adam_step(state, net.parameters(), g)
        iterations = k + 1
        if (k + 1) % config.check_every == 0:
            trace.append(holdout_loss())
            if k >= final_phase_start and len(trace) >= 3:
                prev, cur = trace[-3], trace[-1]
                if (prev - cur) < config.plateau_rtol * abs(prev):
                    break
    final = trace[-1] if trace else (last_loss if iterations else holdout_loss())
    return TrainedStep(
        u_net=u_net,
        z_net=z_net,
        diagnostics=StepDiagnostics(iterations=iterations, final_loss=final, holdout_trace=trace),
    )


# ---------------------------------------------------------------------------
# backward induction driver


def _value_fn(step: TrainedStep) -> Callable:
    net = step.u_net
    return lambda x: net.forward(x)[:, 0]


def _z_at(result_scheme, step, problem, t, x, gradient_mode, stencil_step):
    if step.z_net is not None:
        return step.z_net.forward(x)
    if gradient_mode == "exact":
        grad = step.u_net.input_gradient(x)[:, 0, :]
    else:
        grad = step.u_net.stencil_gradient(x, stencil_step)[:, 0, :]
    return grad * problem.model.sigma(t, x)


def solve(
    problem: ProblemSpec,
    scheme: SchemeKind,
    grid: TimeGrid,
    config: TrainConfig,
    seed: int,
) -> SolveResult:
    """Backward loop i = N-1 .. 0 with warm starts; returns trained steps.

    For reflected schemes the value function passed backward is the
    trained network maxed against the obstacle at the corresponding date;
    the terminal value function is the payoff itself.
    """
    if scheme.reflected and not problem.has_obstacle:
        raise ValueError(f"scheme {scheme.value} requires an obstacle problem")
    if scheme is SchemeKind.RDBDPBIS and problem.z_dependent:
        raise ValueError("RDBDPbis requires a driver independent of z")
    start = time.perf_counter()
    root = np.random.SeedSequence(seed)
    step_seqs = root.spawn(grid.n_steps)

    steps: list[TrainedStep | None] = [None] * grid.n_steps
    next_value: Callable = problem.terminal
    warm: TrainedStep | None = None
    for i in range(grid.n_steps - 1, -1, -1):
        trained = train_timestep(
            problem, grid, i, next_value, scheme, config, step_seqs[i], warm_from=warm
        )
        steps[i] = trained
        warm = trained
        if scheme.reflected:
            next_value = reflected_next_value(
                _value_fn(trained), problem.obstacle, grid.knots[i]
            )
        else:
            next_value = _value_fn(trained)

    x0 = problem.x0[None, :]
    u0 = float(next_value(x0)[0])
    z0 = _z_at(scheme, steps[0], problem, grid.knots[0], x0, config.gradient_mode, config.stencil_step)[0]
    return SolveResult(
        scheme=scheme,
        grid=grid,
        steps=steps,
        u0=u0,
        z0=z0,
        seconds=time.perf_counter() - start,
        seed=seed,
        step_losses=[s.diagnostics.final_loss for s in steps],
        problem=problem,
        gradient_mode=config.gradient_mode,
        stencil_step=config.stencil_step,
    )


def evaluate_solution(result: SolveResult, step_index: int, x: np.ndarray):
    """(u, z) of the trained solution at grid index ``step_index``.

    The terminal index evaluates the payoff exactly; reflected schemes
    return the obstacle-maxed value.  z comes from the scheme's own
    gradient representation.
    """
    problem = result.problem
    if problem is None:
        raise ValueError("result carries no problem; rebuild it before evaluating")
    n = result.grid.n_steps
    if not 0 <= step_index <= n:
        raise IndexError(f"step index {step_index} out of range 0..{n}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = result.grid.knots[step_index]
    if step_index == n:
        u = problem.terminal(x)
        z = problem.analytic_z(t, x) if problem.analytic_z is not None else np.full_like(x, np.nan)
        return u, z
    step = result.steps[step_index]
    u = step.u_net.forward(x)[:, 0]
    if result.scheme.reflected:
        u = np.maximum(u, problem.obstacle(t, x))
    z = _z_at(result.scheme, step, problem, t, x, result.gradient_mode, result.stencil_step)
    return u, z
