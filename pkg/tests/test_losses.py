"""Scheme losses against independently coded naive evaluations."""
import dataclasses

import numpy as np
import pytest

from dbdp.grid import make_uniform_grid
from dbdp.nn import Network, loss_param_gradient
from dbdp.problems import ProblemSpec, simple_problem
from dbdp.sde import SdeModel, StepBatch, StepSampler, philox
from dbdp.schemes import (
    EvalNet,
    dbdp1_loss,
    dbdp2_loss,
    f_step,
    rdbdpbis_loss,
    reflected_next_value,
)


def make_batch(problem, n_steps, step_index, batch, seed):
    grid = make_uniform_grid(problem.horizon, n_steps)
    sampler = StepSampler(problem.model, grid, step_index, philox(seed))
    t = grid.knots[step_index]
    dt = grid.knots[step_index + 1] - grid.knots[step_index]
    return sampler.sample(batch), t, dt


class TestFStep:
    def test_zero_driver(self):
        out = f_step(
            lambda t, x, y, z: np.zeros_like(y),
            0.0,
            np.zeros((1, 1)),
            np.array([[1.0]]),
            np.array([[2.0]]),
            0.1,
            np.array([[0.5]]),
        )
        assert out[0, 0] == pytest.approx(2.0)

    def test_constant_driver(self):
        out = f_step(
            lambda t, x, y, z: np.full_like(y, 2.0),
            0.0,
            np.zeros((1, 1)),
            np.array([[1.0]]),
            np.array([[1.0]]),
            0.1,
            np.array([[0.5]]),
        )
        assert out[0, 0] == pytest.approx(1.3)

    def test_degenerate_step(self):
        out = f_step(
            lambda t, x, y, z: np.full_like(y, 17.0),
            0.0,
            np.zeros((3, 2)),
            np.full((3, 1), 4.0),
            np.ones((3, 2)),
            0.0,
            np.zeros((3, 2)),
        )
        np.testing.assert_allclose(out, 4.0)


class TestDbdp1Loss:
    def test_constant_exact_fit(self):
        problem = simple_problem(2)
        problem = dataclasses.replace(
            problem, driver=lambda t, x, y, z: np.zeros((x.shape[0], 1))
        )
        batch, t, dt = make_batch(problem, 4, 1, 64, seed=0)
        u = Network.create(2, 1, 3, 4, seed=0)
        z = Network.create(2, 2, 3, 4, seed=1)
        for p in u.parameters() + z.parameters():
            p[...] = 0.0
        u.biases[-1][...] = 3.0
        target = np.full((64, 1), 3.0)
        loss = dbdp1_loss(EvalNet(u), EvalNet(z), batch, problem, t, dt, target)
        assert float(loss) == 0.0

    def test_linear_pathwise_identity(self):
        # f = 0, mu = 0, sigma = 1: X_next = X + dW, so U(x)=x, Z=1 is exact
        model = SdeModel.constant(np.zeros(1), np.ones(1), np.ones(1))
        problem = ProblemSpec(
            name="lin",
            dim=1,
            horizon=1.0,
            model=model,
            driver=lambda t, x, y, z: np.zeros((x.shape[0], 1)),
            z_dependent=False,
            terminal=lambda x: x[:, 0],
        )
        batch, t, dt = make_batch(problem, 2, 1, 128, seed=3)

        class Identity:
            def forward(self, x):
                return x.copy()

        class One:
            def forward(self, x):
                return np.ones_like(x)

        target = batch.x_next
        loss = dbdp1_loss(Identity(), One(), batch, problem, t, dt, target)
        assert float(loss) < 1e-28

    def test_matches_naive_evaluation(self, rng):
        problem = simple_problem(3)
        batch, t, dt = make_batch(problem, 5, 2, 50, seed=7)
        u = Network.create(3, 1, 3, 6, seed=4)
        z = Network.create(3, 3, 3, 6, seed=5)
        target = rng.standard_normal((50, 1))

        loss = float(dbdp1_loss(EvalNet(u), EvalNet(z), batch, problem, t, dt, target))
        yv = u.forward(batch.x)
        zv = z.forward(batch.x)
        fv = problem.driver(t, batch.x, yv, zv)
        resid = target - (yv - fv * dt + (zv * batch.dw).sum(axis=1, keepdims=True))
        naive = float(np.mean(resid**2))
        assert loss == pytest.approx(naive, abs=1e-12)

        # the taped training path computes the identical value
        taped, _ = loss_param_gradient(
            [u, z], lambda uu, zz: dbdp1_loss(uu, zz, batch, problem, t, dt, target)
        )
        assert taped == pytest.approx(naive, abs=1e-12)


class TestDbdp2Loss:
    def test_constant_fit_zero(self):
        problem = simple_problem(2)
        problem = dataclasses.replace(
            problem, driver=lambda t, x, y, z: np.zeros((x.shape[0], 1))
        )
        batch, t, dt = make_batch(problem, 4, 1, 32, seed=1)
        u = Network.create(2, 1, 3, 4, seed=0)
        for p in u.parameters():
            p[...] = 0.0
        u.biases[-1][...] = -1.0
        target = np.full((32, 1), -1.0)
        loss = dbdp2_loss(EvalNet(u), batch, problem, t, dt, target, 1e-4)
        assert float(loss) == 0.0

    def test_matches_naive_evaluation(self, rng):
        problem = simple_problem(2)
        batch, t, dt = make_batch(problem, 6, 3, 40, seed=8)
        u = Network.create(2, 1, 3, 5, seed=6)
        target = rng.standard_normal((40, 1))
        h = 1e-4

        for mode in ("stencil", "exact"):
            loss = float(
                dbdp2_loss(EvalNet(u), batch, problem, t, dt, target, h, gradient_mode=mode)
            )
            if mode == "stencil":
                grad = u.stencil_gradient(batch.x, h)[:, 0, :]
            else:
                grad = u.input_gradient(batch.x)[:, 0, :]
            yv = u.forward(batch.x)
            zv = grad * problem.model.sigma(t, batch.x)
            fv = problem.driver(t, batch.x, yv, zv)
            resid = target - (yv - fv * dt + (zv * batch.dw).sum(axis=1, keepdims=True))
            assert loss == pytest.approx(float(np.mean(resid**2)), abs=1e-12)

    def test_near_linear_net_recovers_slope(self):
        # small first-layer weights keep tanh in its linear regime
        net = Network.create(1, 1, 2, 1, seed=0)
        net.weights[0][...] = 1e-3
        net.weights[1][...] = 1.0 / 1e-3  # overall slope ~ 1e-3 / 1e-3 = 1
        stencil = net.stencil_gradient(np.linspace(-1, 1, 9)[:, None], 1e-4)
        exact = net.input_gradient(np.linspace(-1, 1, 9)[:, None])
        assert np.abs(stencil - exact).max() < 1e-6


class TestRdbdpbisLoss:
    def _problem(self, driver):
        model = SdeModel.constant(np.zeros(1), np.ones(1), np.zeros(1))
        return ProblemSpec(
            name="toy",
            dim=1,
            horizon=1.0,
            model=model,
            driver=driver,
            z_dependent=False,
            terminal=lambda x: x[:, 0],
            obstacle=lambda t, x: np.full(x.shape[0], -1.0),
        )

    def test_constant_fit(self):
        problem = self._problem(lambda t, x, y, z: np.zeros_like(y))
        batch, t, dt = make_batch(problem, 2, 0, 16, seed=0)
        u = Network.create(1, 1, 2, 2, seed=0)
        for p in u.parameters():
            p[...] = 0.0
        u.biases[-1][...] = 2.5
        loss = rdbdpbis_loss(EvalNet(u), batch, problem, t, dt, np.full((16, 1), 2.5))
        assert float(loss) == 0.0

    def test_driver_offset_absorbed(self):
        problem = self._problem(lambda t, x, y, z: np.ones_like(y))
        grid = make_uniform_grid(1.0, 10)  # dt = 0.1
        batch, t, dt = make_batch(problem, 10, 4, 16, seed=1)
        c = 0.7
        u = Network.create(1, 1, 2, 2, seed=0)
        for p in u.parameters():
            p[...] = 0.0
        u.biases[-1][...] = c + 0.1
        loss = rdbdpbis_loss(EvalNet(u), batch, problem, t, dt, np.full((16, 1), c))
        assert float(loss) == pytest.approx(0.0, abs=1e-28)

    def test_matches_naive_evaluation(self, rng):
        problem = self._problem(lambda t, x, y, z: 0.3 * y + np.sin(x))
        batch, t, dt = make_batch(problem, 5, 2, 30, seed=2)
        u = Network.create(1, 1, 3, 4, seed=9)
        target = rng.standard_normal((30, 1))
        loss = float(rdbdpbis_loss(EvalNet(u), batch, problem, t, dt, target))
        yv = u.forward(batch.x)
        resid = target - yv + (0.3 * yv + np.sin(batch.x)) * dt
        assert loss == pytest.approx(float(np.mean(resid**2)), abs=1e-12)

    def test_rejects_z_dependent_driver(self):
        problem = simple_problem(1)
        batch, t, dt = make_batch(problem, 2, 0, 8, seed=0)
        u = Network.create(1, 1, 2, 2, seed=0)
        with pytest.raises(ValueError):
            rdbdpbis_loss(EvalNet(u), batch, problem, t, dt, np.zeros((8, 1)))


class TestReflectedNextValue:
    def test_obstacle_binds_everywhere(self):
        fn = reflected_next_value(
            lambda x: np.full(x.shape[0], -10.0), lambda t, x: np.zeros(x.shape[0]), 0.5
        )
        np.testing.assert_array_equal(fn(np.zeros((4, 1))), 0.0)

    def test_disabled_obstacle_passthrough(self):
        u = lambda x: x[:, 0] ** 2
        assert reflected_next_value(u, None, 0.5) is u

    def test_pointwise_max(self):
        fn = reflected_next_value(
            lambda x: x[:, 0], lambda t, x: np.zeros(x.shape[0]), 0.5
        )
        x = np.array([[-2.0], [3.0]])
        np.testing.assert_array_equal(fn(x), [0.0, 3.0])
