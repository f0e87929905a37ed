import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from crcap.channel_capacity import MimoChannelSpec, SisoChannelSpec, p_star, siso_capacity
from crcap.cr_optimizer import (OptimizerConfig, cap_budget, cr_capacity, eval_g0, eval_g1,
                                eval_marginal_constraints, grad_lambda, grad_theta,
                                initial_thetas, lagrangian, lr_sweep, mixture_readout,
                                project_lambda, project_simplex, run_convex, run_nonconvex,
                                solve_cr, theta_to_vector, vector_to_theta)
from crcap.errors import ValidationError
from crcap.oracle import envelope_cr
from crcap.prob_core import binary_source

LN2 = np.log(2)
UNIFORM = np.full((3, 2), 1 / 6)
FAST = OptimizerConfig(iterations=1500, lr_grid=(0.01, 10**-0.5))


class TestLayout:
    def test_column_order(self):
        th = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(theta_to_vector(th), [0, 2, 4, 1, 3, 5])
        np.testing.assert_array_equal(vector_to_theta(theta_to_vector(th)), th)


class TestConstraints:
    def test_uniform_values(self):
        src = binary_source(0.2)
        assert eval_g0(UNIFORM) == pytest.approx(0.0, abs=1e-12)
        assert eval_g1(UNIFORM, src, 0.1) == pytest.approx(-0.1, abs=1e-12)
        np.testing.assert_allclose(eval_marginal_constraints(UNIFORM, src.px), 0, atol=1e-12)

    def test_deterministic_aux(self):
        th = np.array([[0.5, 0], [0, 0.5], [0, 0]])
        assert eval_g0(th) == pytest.approx(-LN2, abs=1e-12)

    def test_budget_is_capped_at_conditional_entropy(self):
        src = binary_source(0.2)
        assert eval_g1(UNIFORM, src, 10.0) == pytest.approx(-src.cond_entropy_x_given_y())

    def test_marginal_signs(self):
        th = np.array([[0.3, 0.1], [0.2, 0.1], [0.1, 0.2]])
        np.testing.assert_allclose(eval_marginal_constraints(th, [0.5, 0.5]),
                                   [0.1, -0.1, -0.1, 0.1], atol=1e-12)

    def test_lagrangian_combines_terms(self):
        src = binary_source(0.3)
        rng = np.random.default_rng(0)
        th = rng.dirichlet(np.ones(6)).reshape(3, 2)
        lam = rng.uniform(0, 2, 5)
        assert lagrangian(th, lam, src, 0.2) == pytest.approx(
            eval_g0(th) + lam @ grad_lambda(th, src, 0.2), abs=1e-14)

    @pytest.mark.parametrize("bad", [np.full((3, 2), 0.2), -UNIFORM])
    def test_not_in_simplex(self, bad):
        with pytest.raises(ValidationError):
            eval_g0(bad)


class TestGradient:
    def test_uniform_example(self):
        g = grad_theta(UNIFORM, np.zeros(5), binary_source(0.5), 0.0)
        np.testing.assert_allclose(g, LN2, atol=1e-12)

    def test_flat_input_gives_flat_output(self):
        g = grad_theta(theta_to_vector(UNIFORM), np.zeros(5), binary_source(0.5), 0.0)
        assert g.shape == (6,)

    def test_multiplier_shifts(self):
        src = binary_source(0.2)
        lam = np.array([0.0, 1.0, 0.0, 0.0, 0.5])
        g = grad_theta(UNIFORM, lam, src, 0.1) - grad_theta(UNIFORM, np.zeros(5), src, 0.1)
        np.testing.assert_allclose(g[:, 0], 1.0, atol=1e-12)
        np.testing.assert_allclose(g[:, 1], -0.5, atol=1e-12)

    def test_wrong_lambda_length(self):
        with pytest.raises(ValidationError):
            grad_theta(UNIFORM, np.zeros(3), binary_source(0.2), 0.1)


class TestProjection:
    def test_examples(self):
        np.testing.assert_allclose(project_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3, atol=1e-15)
        np.testing.assert_allclose(project_simplex([2, 0, 0]), [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)
        np.testing.assert_allclose(project_simplex([1, 1, -5]), [0.5, 0.5, 0], atol=1e-15)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            project_simplex([])
        with pytest.raises(ValidationError):
            project_simplex([np.nan, 1.0])

    @given(arrays(float, st.integers(1, 8), elements=st.floats(-10, 10)))
    def test_on_simplex_and_idempotent(self, z):
        p = project_simplex(z)
        assert p.min() >= 0
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)

    @given(arrays(float, 6, elements=st.floats(-2, 2)))
    def test_kkt(self, z):
        # z - p = -kappa on the support and <= -kappa off it
        p = project_simplex(z)
        r = z - p
        sup = p > 0
        kappa = -r[sup].mean()
        np.testing.assert_allclose(r[sup], -kappa, atol=1e-12)
        assert np.all(r[~sup] <= -kappa + 1e-12)

    def test_batched(self):
        z = np.random.default_rng(1).normal(size=(10, 6))
        p = project_simplex(z)
        for k in range(10):
            np.testing.assert_allclose(p[k], project_simplex(z[k]), atol=0)

    def test_lambda(self):
        np.testing.assert_array_equal(project_lambda([-1, 0, 2]), [0, 0, 2])


class TestRuns:
    def test_initial_thetas_have_source_support(self):
        th = initial_thetas([0.5, 0.5], 10, np.random.default_rng(0))
        assert th.shape == (10, 3, 2)
        np.testing.assert_allclose(th.reshape(10, -1).sum(1), 1, atol=1e-12)

    def test_run_traces(self):
        cfg = OptimizerConfig(iterations=200)
        run = run_convex(binary_source(0.2), 0.3, cfg, with_gap=False)
        assert run.thetas.shape == (200, 3, 2)
        assert run.lambdas.shape == (200, 5)
        assert run.constraint_trace.shape == (200, 6)
        assert np.all(run.lambdas >= 0)
        np.testing.assert_allclose(run.thetas.reshape(200, -1).sum(1), 1, atol=1e-12)

    def test_deterministic(self):
        cfg = OptimizerConfig(iterations=300, seed=4)
        a = run_convex(binary_source(0.3), 0.2, cfg, with_gap=False)
        b = run_convex(binary_source(0.3), 0.2, cfg, with_gap=False)
        np.testing.assert_array_equal(a.thetas, b.thetas)
        assert a.best_value == b.best_value

    def test_best_value_is_feasible(self):
        src = binary_source(0.3)
        run = run_convex(src, 0.2, OptimizerConfig(iterations=1000), with_gap=False)
        assert eval_g1(run.best_theta, src, 0.2) <= 1e-9
        np.testing.assert_allclose(run.best_theta.sum(0), src.px, atol=1e-12)
        assert run.best_value == pytest.approx(-eval_g0(run.best_theta), abs=1e-12)

    def test_gap_is_finite_and_nonnegative(self):
        run = run_convex(binary_source(0.2), 0.3, OptimizerConfig(iterations=500))
        assert np.isfinite(run.nash_gap) and run.nash_gap >= 0

    def test_sweep_covers_grid(self):
        runs = lr_sweep(binary_source(0.2), 0.3, OptimizerConfig(iterations=50, lr_grid=(0.1, 1.0)))
        assert sorted((r.eta_theta, r.eta_lambda) for r in runs) == [
            (0.1, 0.1), (0.1, 1.0), (1.0, 0.1), (1.0, 1.0)]

    def test_rejects_non_source(self):
        with pytest.raises((ValidationError, TypeError)):
            run_convex(np.eye(2) / 2, 0.1)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            OptimizerConfig(iterations=0)
        with pytest.raises(ValidationError):
            OptimizerConfig(eps_floor=1e-3)
        with pytest.raises(ValidationError):
            OptimizerConfig(lr_grid=())


class TestCapacity:
    def test_budget_conventions(self):
        assert cap_budget(SisoChannelSpec(3)) == pytest.approx(LN2)
        assert cap_budget(MimoChannelSpec(np.eye(2), 2)) == pytest.approx(2 * LN2)
        with pytest.raises(ValidationError):
            cap_budget("awgn")

    def test_lossless_source(self):
        assert cr_capacity(binary_source(0.0), SisoChannelSpec(0.0), FAST) == pytest.approx(LN2, abs=1e-3)

    def test_zero_power(self):
        assert cr_capacity(binary_source(0.3), SisoChannelSpec(0.0), FAST) == pytest.approx(0, abs=1e-3)

    def test_saturation(self):
        P = p_star(0.2) * 1.2
        assert cr_capacity(binary_source(0.2), SisoChannelSpec(P), FAST) == pytest.approx(LN2, abs=5e-3)

    @pytest.mark.parametrize("mu,P", [(0.1, 0.5), (0.3, 2.0)])
    def test_interior_matches_oracle(self, mu, P):
        src = binary_source(mu)
        b = siso_capacity(SisoChannelSpec(P), "real")
        v = cr_capacity(src, SisoChannelSpec(P))
        assert v <= envelope_cr(src, b) + 1e-6
        assert v == pytest.approx(envelope_cr(src, b), abs=5e-3)

    def test_scalar_budget_and_solution_fields(self):
        sol = solve_cr(binary_source(0.2), 0.25, FAST, with_gap=True)
        assert sol.cap_budget == 0.25
        assert sol.nash_gap >= 0
        assert (sol.eta_theta, sol.eta_lambda) in [(a, b) for a in FAST.lr_grid for b in FAST.lr_grid]

    def test_monotone_in_power(self):
        src = binary_source(0.3)
        v = [cr_capacity(src, SisoChannelSpec(P), FAST) for P in (0.2, 0.8, 1.6)]
        assert v[0] <= v[1] + 1e-4 <= v[2] + 2e-4


class TestNonconvex:
    @pytest.mark.parametrize("mu,P", [(0.2, 1.0), (0.5, 1.0)])
    def test_matches_envelope(self, mu, P):
        src = binary_source(mu)
        b = siso_capacity(SisoChannelSpec(P), "real")
        run = run_nonconvex(src, b, OptimizerConfig(iterations=500, eta_lambda=0.3))
        assert run.best_value == pytest.approx(envelope_cr(src, b), abs=2e-3)
        assert eval_g1(run.best_theta, src, b) <= 1e-9
        assert run.nash_gap >= 0

    def test_fixed_multipliers_stay_fixed(self):
        lam = np.array([2.0, 0, 0, 0, 0])
        run = run_nonconvex(binary_source(0.2), 0.3, OptimizerConfig(iterations=20),
                            lambda_fixed=lam)
        np.testing.assert_array_equal(run.lambdas, np.tile(lam, (20, 1)))

    def test_mixture_of_endpoints(self):
        # time-sharing of U = X and U independent of X at mu = 1/2
        src = binary_source(0.5)
        ident = np.array([[0.5, 0], [0, 0.5], [0, 0]])
        v, th = mixture_readout(ident[None], src, 0.3)
        assert v == pytest.approx(0.3, abs=1e-9)
        np.testing.assert_allclose(th.sum(0), src.px, atol=1e-12)


class TestSpecExamples:
    def test_projection_worked_example(self):
        np.testing.assert_allclose(project_simplex([1.2, 0.3, -0.5]), [0.95, 0.05, 0], atol=1e-15)

    def test_run_convex_interior_datum(self):
        src = binary_source(0.2)
        run = run_convex(src, siso_capacity(SisoChannelSpec(1.25), "real"), with_gap=False)
        assert 0.574 <= run.best_value <= 0.585

    def test_nonconvex_unconstrained(self):
        src = binary_source(0.2)
        run = run_nonconvex(src, 0.1, OptimizerConfig(iterations=5), lambda_fixed=np.zeros(5))
        assert -eval_g0(run.thetas[0]) == pytest.approx(LN2, abs=1e-9)

    def test_gap_of_exact_equilibrium(self):
        from crcap.cr_optimizer import OptRun
        from crcap.cr_optimizer import nash_gap
        src = binary_source(0.2)
        th = np.array([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]])
        b = 1.0
        g = np.r_[eval_g0(th), grad_lambda(th, src, b)]
        run = OptRun(th[None], np.zeros((1, 5)), g[:1], g[None], LN2, th, 0.1, 0.1)
        assert nash_gap(run, src, b) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.xfail(strict=True, reason="the averaged marginal violation times "
                                           "lambda_max keeps the gap near 0.02-0.07")
    def test_gap_small_at_saturation(self):
        sol = solve_cr(binary_source(0.2), SisoChannelSpec(2.0))
        assert sol.nash_gap <= 0.01
