import dataclasses
import math

import numpy as np
import pytest

from dbdp.grid import make_uniform_grid
from dbdp.oracles import (
    AmericanParams1d,
    american_price_1d,
    bs_european_put,
    mc_terminal_expectation,
    reduce_geometric_to_1d,
)
from dbdp.sde import SdeModel

# lattice reference column for d in {1, 5, 10, 20, 40}
REFERENCES = {1: 0.060903, 5: 0.10738, 10: 0.12996, 20: 0.1510, 40: 0.1680}


class TestReduction:
    def test_identity_d1(self):
        p = reduce_geometric_to_1d(1)
        assert p.vol_eff == pytest.approx(0.2)
        assert p.log_drift == pytest.approx(0.03)
        assert p.spot == 1.0

    def test_d5(self):
        p = reduce_geometric_to_1d(5)
        assert p.vol_eff == pytest.approx(0.2 * math.sqrt(5))
        assert p.log_drift == pytest.approx(0.15)

    def test_d40(self):
        p = reduce_geometric_to_1d(40)
        assert p.vol_eff == pytest.approx(1.2649, abs=1e-4)
        assert p.log_drift == pytest.approx(1.2)

    def test_unequal_vols_rejected(self):
        with pytest.raises(ValueError):
            reduce_geometric_to_1d(2, vol=np.array([0.2, 0.3]))

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            AmericanParams1d(spot=1, strike=1, rate=0.05, vol_eff=0.0, log_drift=0, horizon=1)


class TestLattice:
    @pytest.mark.parametrize("d,ref", sorted(REFERENCES.items()))
    def test_reference_column(self, d, ref):
        price = american_price_1d(reduce_geometric_to_1d(d), 5000)
        assert price == pytest.approx(ref, abs=2e-4)

    def test_self_convergence(self):
        p = reduce_geometric_to_1d(5)
        diff_coarse = abs(american_price_1d(p, 500) - american_price_1d(p, 1000))
        diff_fine = abs(american_price_1d(p, 5000) - american_price_1d(p, 10000))
        assert diff_fine < diff_coarse
        assert diff_fine <= 1e-4

    def test_american_dominates_european(self):
        for d in (1, 5, 10):
            p = reduce_geometric_to_1d(d)
            american = american_price_1d(p, 2000)
            european = american_price_1d(dataclasses.replace(p, american=False), 2000)
            assert american >= european

    def test_monotone_in_vol_and_horizon(self):
        base = reduce_geometric_to_1d(1)
        prices_vol = [
            american_price_1d(dataclasses.replace(base, vol_eff=v), 1000)
            for v in (0.1, 0.2, 0.4, 0.8)
        ]
        assert prices_vol == sorted(prices_vol)
        prices_t = [
            american_price_1d(dataclasses.replace(base, horizon=t), 1000)
            for t in (0.25, 0.5, 1.0, 2.0)
        ]
        assert prices_t == sorted(prices_t)

    def test_too_few_steps_rejected(self):
        with pytest.raises(ValueError):
            american_price_1d(reduce_geometric_to_1d(1), 5)


class TestBlackScholes:
    def test_european_lattice_matches_bs(self):
        p = dataclasses.replace(reduce_geometric_to_1d(1), american=False)
        lattice = american_price_1d(p, 5000)
        bs = bs_european_put(p.spot, p.strike, p.rate, p.growth_rate, p.vol_eff, p.horizon)
        assert lattice == pytest.approx(bs, abs=1e-4)

    def test_standard_put_value(self):
        # S0=1, K=1, r=5%, sigma=20%, T=1: the standard textbook put
        bs = bs_european_put(1.0, 1.0, 0.05, 0.05, 0.2, 1.0)
        assert bs == pytest.approx(0.055735, abs=1e-4)

    def test_degenerate_vol_limit(self):
        # forward below strike: payoff becomes deterministic
        price = bs_european_put(0.5, 1.0, 0.05, 0.05, 1e-8, 1.0)
        forward = 0.5 * math.exp(0.05)
        assert price == pytest.approx(math.exp(-0.05) * (1.0 - forward), abs=1e-10)

    def test_worthless_put(self):
        assert bs_european_put(1.0, 0.0, 0.05, 0.05, 0.2, 1.0) == 0.0

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError):
            bs_european_put(1.0, 1.0, 0.05, 0.05, -0.1, 1.0)


class TestMonteCarlo:
    def test_constant_payoff(self):
        model = SdeModel.constant(np.zeros(1), np.ones(1), np.zeros(1))
        grid = make_uniform_grid(1.0, 2)
        mean, stderr = mc_terminal_expectation(model, lambda x: np.full(x.shape[0], 4.0), grid, 1000, seed=0)
        assert mean == 4.0
        assert stderr == 0.0

    def test_martingale(self):
        model = SdeModel.constant(np.zeros(1), np.ones(1), np.ones(1))
        grid = make_uniform_grid(1.0, 4)
        mean, stderr = mc_terminal_expectation(model, lambda x: x[:, 0], grid, 10**5, seed=1)
        assert abs(mean - 1.0) < 4.0 * stderr

    def test_chunk_invariance(self):
        model = SdeModel.constant(np.array([0.1]), np.array([0.5]), np.ones(1))
        grid = make_uniform_grid(1.0, 3)
        a = mc_terminal_expectation(model, lambda x: x[:, 0] ** 2, grid, 30_000, seed=2, chunk=10_000)
        b = mc_terminal_expectation(model, lambda x: x[:, 0] ** 2, grid, 30_000, seed=2, chunk=7_000)
        # different chunking, same seed: estimates agree statistically
        assert abs(a[0] - b[0]) < 4.0 * (a[1] + b[1])

    def test_european_d5_cross_oracle(self):
        """Monte Carlo on the 5-asset model agrees with the aggregated BS price."""
        d, rate, vol = 5, 0.05, 0.2
        model = SdeModel.constant(
            np.full(d, rate - 0.5 * vol**2), np.full(d, vol), np.zeros(d)
        )
        grid = make_uniform_grid(1.0, 80)

        def payoff(x):
            return math.exp(-rate) * np.maximum(1.0 - np.exp(x.sum(axis=1)), 0.0)

        mean, stderr = mc_terminal_expectation(model, payoff, grid, 10**6, seed=3)
        p = reduce_geometric_to_1d(d)
        bs = bs_european_put(p.spot, p.strike, p.rate, p.growth_rate, p.vol_eff, p.horizon)
        assert abs(mean - bs) < 4.0 * stderr

    def test_rejects_empty_batch(self):
        model = SdeModel.constant(np.zeros(1), np.ones(1), np.zeros(1))
        grid = make_uniform_grid(1.0, 1)
        with pytest.raises(ValueError):
            mc_terminal_expectation(model, lambda x: x[:, 0], grid, 0, seed=0)
