"""Non-neural reference computations.

The geometric-basket American put on d identical lognormal assets reduces
to a one-dimensional American put on the product asset, priced here on a
recombining binomial lattice; a Black-Scholes closed form and a plain
Monte Carlo terminal expectation serve as cross-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .sde import SdeModel, philox


@dataclass(frozen=True)
class AmericanParams1d:
    """Aggregated 1-d parameters of the geometric-basket put."""

    spot: float
    strike: float
    rate: float
    vol_eff: float
    log_drift: float  # risk-neutral drift of log(product asset)
    horizon: float
    american: bool = True

    def __post_init__(self):
        if self.vol_eff <= 0 or self.horizon <= 0 or self.strike <= 0:
            raise ValueError("vol_eff, horizon and strike must be positive")

    @property
    def growth_rate(self) -> float:
        """Exponential growth rate of the product asset's mean."""
        return self.log_drift + 0.5 * self.vol_eff**2


def reduce_geometric_to_1d(
    d: int,
    strike: float = 1.0,
    rate: float = 0.05,
    vol: float | np.ndarray = 0.2,
    horizon: float = 1.0,
    spot: float | np.ndarray = 1.0,
) -> AmericanParams1d:
    """Aggregate d i.i.d. lognormal assets into the 1-d product asset.

    The product of d GBMs with equal volatility is lognormal with
    log-drift d (r - vol^2 / 2) and volatility vol * sqrt(d).
    """
    vols = np.broadcast_to(np.asarray(vol, dtype=float), (d,))
    if not np.all(vols == vols[0]):
        raise ValueError("reduction requires identical per-asset volatilities")
    spots = np.broadcast_to(np.asarray(spot, dtype=float), (d,))
    v = float(vols[0])
    return AmericanParams1d(
        spot=float(np.prod(spots)),
        strike=float(strike),
        rate=float(rate),
        vol_eff=v * math.sqrt(d),
        log_drift=d * (rate - 0.5 * v**2),
        horizon=float(horizon),
    )


def american_price_1d(params: AmericanParams1d, lattice_steps: int = 5000) -> float:
    """Put price by backward induction on a CRR lattice.

    The product asset's excess growth over the discount rate is absorbed
    into the step probability, i.e. treated as a (possibly negative)
    dividend yield; early exercise is checked at every node when
    ``params.american``.
    """
    m = lattice_steps
    if m < 10:
        raise ValueError("need at least 10 lattice steps")
    dt = params.horizon / m
    up = math.exp(params.vol_eff * math.sqrt(dt))
    down = 1.0 / up
    growth = math.exp(params.growth_rate * dt)
    prob = (growth - down) / (up - down)
    if not 0.0 < prob < 1.0:
        raise ValueError(f"lattice step probability {prob} outside (0, 1); increase steps")
    disc = math.exp(-params.rate * dt)
    j = np.arange(m + 1)
    prices = params.spot * up ** (2.0 * j - m)
    values = np.maximum(params.strike - prices, 0.0)
    for level in range(m - 1, -1, -1):
        values = disc * (prob * values[1:] + (1.0 - prob) * values[:-1])
        if params.american:
            j = np.arange(level + 1)
            prices = params.spot * up ** (2.0 * j - level)
            values = np.maximum(values, params.strike - prices)
    return float(values[0])


def bs_european_put(
    spot: float, strike: float, rate: float, growth_rate: float, vol: float, horizon: float
) -> float:
    """Black-Scholes put for an asset whose mean grows at ``growth_rate``.

    The gap between growth and discount rates acts as a continuous yield.
    """
    if vol <= 0 or horizon <= 0:
        raise ValueError("vol and horizon must be positive")
    if strike <= 0:
        return 0.0
    sq = vol * math.sqrt(horizon)
    forward = spot * math.exp(growth_rate * horizon)
    d1 = (math.log(forward / strike) + 0.5 * sq**2) / sq
    d2 = d1 - sq
    return math.exp(-rate * horizon) * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))


def mc_terminal_expectation(
    model: SdeModel, g, grid, batch: int, seed, chunk: int = 100_000
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of E[g(X_T)] under Euler.

    Paths are stepped without being stored, in chunks, with per-chunk
    Philox streams so the estimate is independent of the chunk size.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    ss = np.random.SeedSequence(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    streams = iter(ss.spawn(-(-batch // chunk)))
    while done < batch:
        b = min(chunk, batch - done)
        rng = philox(next(streams))
        x = np.broadcast_to(model.x0, (b, model.dim)).copy()
        for i in range(grid.n_steps):
            t_i = grid.knots[i]
            dt_i = grid.knots[i + 1] - grid.knots[i]
            dw = rng.standard_normal((b, model.dim)) * math.sqrt(dt_i)
            if model.diagonal:
                diff = model.sigma(t_i, x) * dw
            else:
                diff = np.einsum("bij,bj->bi", model.sigma(t_i, x), dw)
            x = x + model.mu(t_i, x) * dt_i + diff
        vals = np.asarray(g(x), dtype=float).reshape(-1)
        total += vals.sum()
        total_sq += (vals * vals).sum()
        done += b
    mean = total / batch
    var = max(total_sq / batch - mean * mean, 0.0)
    stderr = math.sqrt(var / batch)
    return mean, stderr
