import numpy as np
import pytest

from svrapd.geometry import entropy_simplex_geometry, euclidean_box_geometry, grad_map
from svrapd.problems import synthetic_bilinear, synthetic_dro
from svrapd.schedule import EpochParams, constant_schedule, polynomial_schedule
from svrapd.solver import (
    EpochState,
    IterateWindow,
    NonFiniteIterateError,
    OracleCounter,
    RngStream,
    extrapolation_y,
    initial_state,
    refresh_full_gradients,
    run,
    run_epoch,
    svrg_grad_x,
    svrg_grad_y,
)


class StubSchedule:
    kind = "constant"

    def __init__(self, tau, sigma, gamma_x, gamma_y, steps):
        self.params = EpochParams(tau, sigma, gamma_x, gamma_y, steps, 1.0)
        self.alpha = self.beta = 1.0

    def epoch(self, k):
        return self.params


def geoms_for(problem):
    return (
        euclidean_box_geometry(problem.primal_box.lower, problem.primal_box.upper),
        entropy_simplex_geometry(problem.dual_dim),
    )


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(7)
        b = RngStream(7)
        seq_a = [a.draw("dual", k, t, 13) for k in range(1, 4) for t in range(5)]
        seq_b = [b.draw("dual", k, t, 13) for k in range(1, 4) for t in range(5)]
        assert seq_a == seq_b

    def test_seed_changes_stream(self):
        a = [RngStream(7).draw("dual", 1, t, 13) for t in range(20)]
        b = [RngStream(8).draw("dual", 1, t, 13) for t in range(20)]
        assert a != b

    def test_sides_independent(self):
        s = RngStream(5)
        dual = [s.draw("dual", 1, t, 13) for t in range(20)]
        primal = [s.draw("primal", 1, t, 13) for t in range(20)]
        assert dual != primal

    def test_call_order_irrelevant(self):
        s = RngStream(3)
        first = s.draw("primal", 2, 9, 11)
        s2 = RngStream(3)
        for t in range(5):
            s2.draw("dual", 1, t, 11)
        assert s2.draw("primal", 2, 9, 11) == first

    def test_range_and_coverage(self):
        s = RngStream(1)
        draws = [s.draw("dual", 1, t, 4) for t in range(400)]
        assert set(draws) == {0, 1, 2, 3}


def make_state(problem, geoms, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    x = rng.uniform(problem.primal_box.lower, problem.primal_box.upper)
    y = rng.dirichlet(np.ones(problem.dual_dim))
    state, window = initial_state(problem, geoms, start=(x, y))
    refresh_full_gradients(problem, state)
    return state, window


class TestEstimators:
    def test_single_component_cancellation(self):
        p = synthetic_dro(1, 3, seed=1, lambda_max=2.0)
        geoms = geoms_for(p)
        state, window = make_state(p, geoms)
        window.x = window.x * 0.5
        xi = svrg_grad_y(p, 0, window, state)
        np.testing.assert_array_equal(xi, p.grad_y_full(window.x, window.y))

    def test_at_snapshot_returns_full_gradient(self):
        p = synthetic_dro(6, 3, seed=2, lambda_max=2.0)
        geoms = geoms_for(p)
        state, window = make_state(p, geoms)
        for j in range(p.n):
            np.testing.assert_array_equal(svrg_grad_y(p, j, window, state), state.full_grad_y)
            np.testing.assert_array_equal(
                svrg_grad_x(p, j, window.x, window.y, state), state.full_grad_x
            )

    def test_enumeration_reproduces_full_gradients(self):
        p = synthetic_dro(16, 4, seed=3, lambda_max=2.0)
        geoms = geoms_for(p)
        state, window = make_state(p, geoms)
        rng = np.random.default_rng(5)
        window.x = rng.uniform(p.primal_box.lower, p.primal_box.upper)
        window.y = rng.dirichlet(np.ones(p.n))
        window.x_prev = rng.uniform(p.primal_box.lower, p.primal_box.upper)
        window.y_prev = rng.dirichlet(np.ones(p.n))
        xi_mean = np.mean([svrg_grad_y(p, j, window, state) for j in range(p.n)], axis=0)
        np.testing.assert_allclose(xi_mean, p.grad_y_full(window.x, window.y), atol=1e-10)
        y_next = rng.dirichlet(np.ones(p.n))
        zeta_mean = np.mean(
            [svrg_grad_x(p, i, window.x, y_next, state) for i in range(p.n)], axis=0
        )
        np.testing.assert_allclose(zeta_mean, p.grad_x_full(window.x, y_next), atol=1e-10)
        q_mean = np.mean([extrapolation_y(p, j, window) for j in range(p.n)], axis=0)
        direct = p.grad_y_full(window.x, window.y) - p.grad_y_full(window.x_prev, window.y_prev)
        np.testing.assert_allclose(q_mean, direct, atol=1e-10)

    def test_extrapolation_zero_cases(self):
        p = synthetic_dro(4, 2, seed=6, lambda_max=2.0)
        geoms = geoms_for(p)
        _, window = initial_state(p, geoms)
        for j in range(p.n):
            np.testing.assert_array_equal(extrapolation_y(p, j, window), np.zeros(p.n))

    def test_extrapolation_matches_direct_difference(self):
        p = synthetic_dro(5, 3, seed=8, lambda_max=2.0)
        geoms = geoms_for(p)
        _, window = make_state(p, geoms, rng_seed=4)
        rng = np.random.default_rng(9)
        window.x_prev = rng.uniform(p.primal_box.lower, p.primal_box.upper)
        window.y_prev = rng.dirichlet(np.ones(p.n))
        for j in range(p.n):
            direct = p.grad_y_component(j, window.x, window.y) \
                - p.grad_y_component(j, window.x_prev, window.y_prev)
            np.testing.assert_array_equal(extrapolation_y(p, j, window), direct)


class TestRunEpoch:
    def test_feasibility_and_window_rollover(self):
        p = synthetic_dro(8, 3, seed=10, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = StubSchedule(1e-3, 1e-3, 0.2, 0.2, steps=25)
        state, window = initial_state(p, geoms)
        counter = OracleCounter()
        state, window, steps = run_epoch(p, geoms, schedule, 1, state, window,
                                         RngStream(0), counter)
        assert steps == 25
        assert counter.units == p.n + 5 * 25
        assert abs(window.y.sum() - 1.0) <= 1e-12
        assert np.all(window.y > 0.0)
        assert p.primal_box.contains(window.x)
        assert abs(state.snapshot_y.sum() - 1.0) <= 1e-9
        # memory vectors are the epoch averages of the mirror images
        assert np.all(np.isfinite(state.memory_x))
        assert np.all(np.isfinite(state.memory_y))

    def test_full_momentum_returns_memory_image(self):
        from svrapd.geometry import grad_map_inverse

        p = synthetic_bilinear(1, 2, 2, seed=3)
        geoms = geoms_for(p)
        schedule = StubSchedule(1e-9, 1e-9, 1.0, 1.0, steps=1)
        state, window = initial_state(p, geoms)
        target_y = np.array([0.25, 0.75])
        state.memory_y = grad_map(geoms[1], target_y)
        counter = OracleCounter()
        new_state, new_window, _ = run_epoch(p, geoms, schedule, 1, state, window,
                                             RngStream(0), counter)
        # with gamma=1 and a vanishing step the dual iterate is the memory image
        np.testing.assert_allclose(new_window.y, target_y, atol=1e-7)

    def test_determinism_across_seeds(self):
        p = synthetic_dro(8, 3, seed=11, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = StubSchedule(1e-3, 1e-3, 0.2, 0.2, steps=30)

        def trajectory(seed):
            state, window = initial_state(p, geoms)
            state, window, _ = run_epoch(p, geoms, schedule, 1, state, window,
                                         RngStream(seed), OracleCounter())
            return window.x, window.y

        x7a, y7a = trajectory(7)
        x7b, y7b = trajectory(7)
        x8, y8 = trajectory(8)
        np.testing.assert_array_equal(x7a, x7b)
        np.testing.assert_array_equal(y7a, y7b)
        assert not (np.array_equal(x7a, x8) and np.array_equal(y7a, y8))

    def test_nonfinite_aborts_with_snapshot(self):
        class Poisoned:
            def __init__(self, base):
                self._base = base

            def __getattr__(self, name):
                return getattr(self._base, name)

            def grad_x_component(self, i, x, y):
                g = self._base.grad_x_component(i, x, y)
                g[0] = np.nan
                return g

        p = Poisoned(synthetic_dro(4, 2, seed=12, lambda_max=2.0))
        geoms = geoms_for(p)
        schedule = StubSchedule(1e-3, 1e-3, 0.2, 0.2, steps=5)
        state, window = initial_state(p, geoms)
        with pytest.raises(NonFiniteIterateError) as err:
            run_epoch(p, geoms, schedule, 1, state, window, RngStream(0), OracleCounter())
        assert "epoch" in err.value.snapshot and "x" in err.value.snapshot


def reference_run(problem, tau, sigma, gamma_x, gamma_y, epochs, steps):
    """Line-by-line reimplementation of the n=1 deterministic limit."""
    x, y = problem.initial_point()
    x, y = x.copy(), y.copy()
    xp, yp = x.copy(), y.copy()
    r = x.copy()                      # euclidean mirror image
    s = 1.0 + np.log(y)               # entropy mirror image
    lo, hi = problem.primal_box.lower, problem.primal_box.upper
    sx, sy = x.copy(), y.copy()
    for _ in range(epochs):
        g_full_x = problem.grad_x_full(sx, sy)
        g_full_y = problem.grad_y_full(sx, sy)
        acc_x = np.zeros_like(x)
        acc_y = np.zeros_like(y)
        acc_r = np.zeros_like(r)
        acc_s = np.zeros_like(s)
        for _t in range(steps):
            y_hat = np.exp((1.0 - gamma_y) * (1.0 + np.log(y)) + gamma_y * s - 1.0)
            xi = problem.grad_y_component(0, x, y) - problem.grad_y_component(0, sx, sy) + g_full_y
            q = problem.grad_y_component(0, x, y) - problem.grad_y_component(0, xp, yp)
            w = y_hat * np.exp(sigma * (xi + q))
            y_new = w / w.sum()
            x_hat = (1.0 - gamma_x) * x + gamma_x * r
            zeta = problem.grad_x_component(0, x, y_new) - problem.grad_x_component(0, sx, sy) + g_full_x
            x_new = np.clip(x_hat - tau * zeta, lo, hi)
            acc_x += x_new
            acc_y += y_new
            acc_r += x_new
            acc_s += 1.0 + np.log(y_new)
            xp, yp = x, y
            x, y = x_new, y_new
        sx, sy = acc_x / steps, acc_y / steps
        r, s = acc_r / steps, acc_s / steps
    return x, y


class TestFastPathEquivalence:
    def test_sparse_dual_loop_matches_generic(self, monkeypatch):
        p = synthetic_dro(12, 3, seed=30, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = StubSchedule(2e-3, 2e-3, 0.15, 0.25, steps=40)

        def trajectory():
            state, window = initial_state(p, geoms)
            rng = RngStream(5)
            counter = OracleCounter()
            for k in range(1, 4):
                state, window, _ = run_epoch(p, geoms, schedule, k, state, window,
                                             rng, counter)
            return state, window, counter.units

        fast_state, fast_window, fast_units = trajectory()
        monkeypatch.setattr(p, "dual_gradient_sparse", False, raising=True)
        slow_state, slow_window, slow_units = trajectory()
        assert fast_units == slow_units
        np.testing.assert_allclose(fast_window.x, slow_window.x, atol=1e-12)
        np.testing.assert_allclose(fast_window.y, slow_window.y, atol=1e-12)
        np.testing.assert_allclose(fast_state.snapshot_x, slow_state.snapshot_x, atol=1e-12)
        np.testing.assert_allclose(fast_state.memory_y, slow_state.memory_y, atol=1e-11)


class TestDeterministicDegeneration:
    def test_matches_reference_for_100_steps(self):
        p = synthetic_bilinear(1, 2, 3, seed=21)
        geoms = geoms_for(p)
        tau = sigma = 0.05
        gx, gy = 0.3, 0.4
        schedule = StubSchedule(tau, sigma, gx, gy, steps=10)
        state, window = initial_state(p, geoms)
        counter = OracleCounter()
        rng = RngStream(0)
        for k in range(1, 11):
            state, window, _ = run_epoch(p, geoms, schedule, k, state, window, rng, counter)
        ref_x, ref_y = reference_run(p, tau, sigma, gx, gy, epochs=10, steps=10)
        np.testing.assert_allclose(window.x, ref_x, atol=1e-12)
        np.testing.assert_allclose(window.y, ref_y, atol=1e-12)


class TestRun:
    def test_single_epoch_ergodic_equals_snapshot(self):
        p = synthetic_dro(6, 2, seed=13, lambda_max=2.0)
        geoms = geoms_for(p)
        profile = LipschitzProfileFor(p)
        for maker in (constant_schedule, polynomial_schedule):
            schedule = maker(profile, p.n, 0.5, 0.5, 0.5)
            result = run(p, geoms, schedule, epochs=1, seed=3)
            np.testing.assert_array_equal(result.ergodic[0], result.snapshot[0])
            np.testing.assert_array_equal(result.ergodic[1], result.snapshot[1])

    def test_constant_average_of_two_snapshots(self):
        p = synthetic_dro(6, 2, seed=14, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = constant_schedule(LipschitzProfileFor(p), p.n, 0.5, 0.5, 0.5)
        first = run(p, geoms, schedule, epochs=1, seed=3)
        second = run(p, geoms, schedule, epochs=2, seed=3)
        np.testing.assert_allclose(
            second.ergodic[0], (first.snapshot[0] + second.snapshot[0]) / 2.0,
            atol=1e-14,
        )

    def test_polynomial_weights(self):
        p = synthetic_dro(5, 2, seed=15, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = polynomial_schedule(LipschitzProfileFor(p), p.n, 1.0, 0.5, 0.5)
        first = run(p, geoms, schedule, epochs=1, seed=3)
        second = run(p, geoms, schedule, epochs=2, seed=3)
        # inner lengths are T(k+1)^2 = 4 and 9, so the weights are (4, 9)/13
        expected = (4.0 * first.snapshot[0] + 9.0 * second.snapshot[0]) / 13.0
        np.testing.assert_allclose(second.ergodic[0], expected, atol=1e-14)

    def test_budget_stops_runs(self):
        p = synthetic_dro(6, 2, seed=16, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = constant_schedule(LipschitzProfileFor(p), p.n, 2.0, 0.5, 0.5)
        budget = 100
        result = run(p, geoms, schedule, epochs=50, seed=1, budget=budget)
        assert result.oracle_units <= budget
        assert result.oracle_units > budget - (p.n + 5)

    def test_rows_strictly_increasing_units(self):
        p = synthetic_dro(6, 2, seed=17, lambda_max=2.0)
        geoms = geoms_for(p)
        schedule = constant_schedule(LipschitzProfileFor(p), p.n, 0.5, 0.5, 0.5)
        result = run(p, geoms, schedule, epochs=4, seed=1)
        units = [row.oracle_units for row in result.rows]
        assert all(b > a for a, b in zip(units, units[1:]))


def LipschitzProfileFor(problem):
    from svrapd.problems import empirical_lipschitz

    return empirical_lipschitz(problem, samples=300, seed=0)
