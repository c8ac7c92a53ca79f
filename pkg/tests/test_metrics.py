import numpy as np
import pytest

from svrapd.geometry import Box, entropy_simplex_geometry, euclidean_box_geometry
from svrapd.metrics import (
    GapEvaluator,
    MetricsError,
    ReferenceSaddle,
    clear_cache,
    fit_loglog_slope,
    gap,
    load_reference,
    saddle_oracle,
    save_reference,
)
from svrapd.problems import (
    BilinearInstance,
    PrimalDualPoint,
    synthetic_bilinear,
    synthetic_dro,
)
from svrapd.schedule import constant_schedule
from svrapd.solver import run as solver_run
from svrapd.problems import full_gradient_lipschitz

from test_baselines import RegularizedToy, geoms_for, zero_problem


@pytest.fixture(autouse=True)
def fresh_cache():
    clear_cache()
    yield
    clear_cache()


class TestSaddleOracle:
    def test_zero_problem_accepts_initial_point(self):
        p = zero_problem()
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        assert ref.residual <= 1e-9

    def test_analytic_toy(self):
        p = RegularizedToy()
        ref = saddle_oracle(p, geoms_for(p), tol=1e-8, max_iters=20000)
        assert abs(ref.point.x[0]) <= 1e-6
        np.testing.assert_allclose(ref.point.y, [0.5, 0.5], atol=1e-6)

    def test_cache_hit_returns_identical_object(self):
        p = synthetic_bilinear(3, 2, 3, seed=4)
        geoms = geoms_for(p)
        a = saddle_oracle(p, geoms, tol=1e-8)
        b = saddle_oracle(p, geoms, tol=1e-8)
        assert a is b

    def test_nonconvergence_raises(self):
        p = synthetic_dro(10, 3, seed=9, lambda_max=2.0)
        start = p.initial_point()
        with pytest.raises(MetricsError):
            saddle_oracle(p, geoms_for(p), tol=1e-15, max_iters=1, start=start)

    def test_dro_reference_satisfies_tolerance(self):
        p = synthetic_dro(30, 4, seed=10, lambda_max=2.0, rho=3.0)
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        assert ref.residual <= 1e-9
        assert ref.provenance


class TestGap:
    def test_reference_point_close_to_zero(self):
        p = synthetic_dro(20, 3, seed=11, lambda_max=2.0, rho=3.0)
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        value = gap(p, ref.point, ref)
        assert abs(value) <= 2.0 * max(ref.residual, 1e-12)

    def test_zero_problem_any_candidate(self):
        p = zero_problem()
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        rng = np.random.default_rng(3)
        for _ in range(10):
            cand = PrimalDualPoint(rng.uniform(-1, 1, 2), rng.dirichlet(np.ones(3)))
            assert gap(p, cand, ref) == 0.0

    def test_perturbed_candidate_matches_direct_evaluation(self):
        p = RegularizedToy()
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9, max_iters=50000)
        cand = PrimalDualPoint(ref.point.x + 0.25, ref.point.y.copy())
        direct = p.lagrangian(cand.x, ref.point.y) - p.lagrangian(ref.point.x, cand.y)
        assert direct > 0.0
        assert gap(p, cand, ref) == pytest.approx(direct, rel=1e-12)

    def test_nonnegative_over_random_candidates(self):
        p = synthetic_dro(16, 3, seed=12, lambda_max=2.0, rho=3.0)
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        rng = np.random.default_rng(5)
        floor = -10.0 * ref.residual
        for _ in range(1000):
            x = rng.uniform(p.primal_box.lower, p.primal_box.upper)
            y = rng.dirichlet(np.ones(p.n))
            raw = p.lagrangian(x, ref.point.y) - p.lagrangian(ref.point.x, y)
            assert raw >= floor

    def test_clamp_counter(self):
        p = RegularizedToy()
        true_ref = saddle_oracle(p, geoms_for(p), tol=1e-9, max_iters=50000)
        off = PrimalDualPoint(true_ref.point.x + 1e-4, true_ref.point.y.copy())
        imperfect = ReferenceSaddle(off, residual=1e-3, provenance="test")
        evaluator = GapEvaluator(p, imperfect)
        value = evaluator.gap(true_ref.point)
        assert value == 0.0
        assert evaluator.clamped == 1

    def test_infeasible_candidate_rejected(self):
        p = synthetic_dro(8, 2, seed=13, lambda_max=2.0, rho=2.0)
        ref = saddle_oracle(p, geoms_for(p), tol=1e-9)
        from svrapd.problems import InfeasiblePointError

        with pytest.raises(InfeasiblePointError):
            gap(p, PrimalDualPoint(np.full(3, 99.0), np.full(8, 1.0 / 8)), ref)

    def test_gap_decreases_along_solver_run(self):
        p = synthetic_dro(16, 3, seed=14, lambda_max=2.0, rho=2.0)
        geoms = geoms_for(p)
        ref = saddle_oracle(p, geoms, tol=1e-9)
        evaluator = GapEvaluator(p, ref)
        profile = full_gradient_lipschitz(p, samples=300, seed=0)
        schedule = constant_schedule(profile, p.n, 8.0, 0.05, 0.9)
        result = solver_run(p, geoms, schedule, epochs=64, seed=3, gap_fn=evaluator)
        assert result.rows[63].gap_ergodic < result.rows[3].gap_ergodic


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ref = ReferenceSaddle(
            PrimalDualPoint(np.array([0.1234567890123456789, -3.0]),
                            np.array([0.25, 0.75])),
            residual=1.5e-10, provenance="cafebabe",
        )
        path = tmp_path / "ref.txt"
        save_reference(path, ref)
        back = load_reference(path)
        np.testing.assert_array_equal(back.point.x, ref.point.x)
        np.testing.assert_array_equal(back.point.y, ref.point.y)
        assert back.residual == ref.residual
        assert back.provenance == ref.provenance

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("not a reference\n")
        with pytest.raises(MetricsError):
            load_reference(path)


class TestSlopeFit:
    def test_known_powerlaw(self):
        points = [(k, k**-2.0) for k in range(4, 65)]
        assert fit_loglog_slope(points) == pytest.approx(-2.0, abs=1e-12)

    def test_single_point_undefined(self):
        assert fit_loglog_slope([(1, 0.5)]) is None
