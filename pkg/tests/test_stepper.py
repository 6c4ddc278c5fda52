"""Fully implicit and linearized L1 time stepping."""

import numpy as np
import pytest
from scipy.special import gamma

from subdiff_l1.errors import ConvergenceError, ParameterError, SolverError
from subdiff_l1.kernel import l1_weights
from subdiff_l1.problems import EXAMPLE2_CASES, example1, example2
from subdiff_l1.spatial import SpatialGrid
from subdiff_l1.special import mittag_leffler
from subdiff_l1.stepper import (
    ProblemSpec,
    SchemeConfig,
    Variant,
    history_rhs,
    solve,
    step_implicit,
    step_linearized,
)


def _zero(u):
    return np.zeros_like(u)


def _heat(alpha, M, T=1.0, u0=lambda x: np.sin(np.pi * x), f=_zero, df=_zero):
    return ProblemSpec(alpha=alpha, grid=SpatialGrid(1, 1.0, M), T=T, f=f, df=df, u0=u0)


def _linear(lam):
    return (lambda u: lam * u), (lambda u: np.full_like(u, lam))


class TestSteps:
    def test_eigenmode_first_step(self):
        alpha, M, N = 0.5, 16, 10
        problem = _heat(alpha, M)
        config = SchemeConfig(N)
        tau = 1.0 / N
        c = tau**-alpha / gamma(2 - alpha)
        h = 1.0 / M
        lam_h = 4 / h**2 * np.sin(np.pi * h / 2) ** 2

        u0 = problem.initial_field()
        u1 = step_implicit(u0[None, :], 1, problem, config)
        np.testing.assert_allclose(u1, u0 * c / (c + lam_h), rtol=1e-12)

    def test_scalar_recurrence(self):
        # M = 2: one interior node, Delta_h u = -2 u / h^2, f(u) = u
        alpha, N, L = 0.3, 25, 2.0
        f, df = _linear(1.0)
        problem = ProblemSpec(
            alpha=alpha, grid=SpatialGrid(1, L, 2), T=1.0, f=f, df=df,
            u0=lambda x: np.ones_like(x),
        )
        U = solve(problem, SchemeConfig(N)).fields[:, 0]

        tau = 1.0 / N
        c = tau**-alpha / gamma(2 - alpha)
        k = 2.0 / (L / 2) ** 2 - 1.0
        a = [(i + 1) ** (1 - alpha) - i ** (1 - alpha) for i in range(N)]
        ref = [1.0]
        for n in range(1, N + 1):
            s = sum(a[n - j] * (ref[j] - ref[j - 1]) for j in range(1, n))
            ref.append(c * (ref[n - 1] - s) / (c + k))
        np.testing.assert_allclose(U, ref, rtol=1e-12)

    def test_zero_stays_zero(self):
        problem = _heat(0.5, 8, u0=lambda x: np.zeros_like(x))
        for variant in Variant:
            assert np.all(solve(problem, SchemeConfig(12, variant)).fields == 0.0)

    @pytest.mark.parametrize("lam", [0.0, 1.5, -2.0])
    def test_variants_agree_for_linear_f(self, lam):
        f, df = _linear(lam)
        problem = _heat(0.6, 20, f=f, df=df)
        implicit = solve(problem, SchemeConfig(40))
        linearized = solve(problem, SchemeConfig(40, Variant.LINEARIZED))
        assert np.max(np.abs(implicit.fields - linearized.fields)) <= 1e-10

    def test_linearized_gap_is_higher_order(self):
        # the one-step linearization changes each step by O(tau^2); the
        # accumulated gap must shrink faster than the first-order scheme error
        gaps = []
        for N in (20, 40, 80, 160):
            problem = example2("b", 0.6, M=100)
            implicit = solve(problem, SchemeConfig(N)).final
            linearized = solve(problem, SchemeConfig(N, "linearized")).final
            gaps.append(np.max(np.abs(implicit - linearized)))
        rates = np.log2(np.array(gaps[:-1]) / gaps[1:])
        assert np.all(rates > 1.4)

    def test_history_rhs(self):
        w = l1_weights(0.4, 6)
        rng = np.random.default_rng(2)
        hist = rng.standard_normal((6, 3))
        n = 5
        expected = w.a[n - 1] * hist[0] + sum(
            (w.a[n - j - 1] - w.a[n - j]) * hist[j] for j in range(1, n)
        )
        np.testing.assert_allclose(history_rhs(hist, n, w), expected, rtol=1e-13)

    def test_recompute_step_is_bit_stable(self):
        problem = example1(0.4, 0.6, 50)
        config = SchemeConfig(16)
        traj = solve(problem, config)
        for n in (1, 7, 16):
            assert np.array_equal(step_implicit(traj.fields[:n], n, problem, config), traj.fields[n])

    def test_single_step_run(self):
        problem = example1(0.5, 0.5, 20)
        config = SchemeConfig(1)
        traj = solve(problem, config)
        assert traj.fields.shape == (2, 19)
        u0 = problem.initial_field()[None, :]
        assert np.array_equal(traj.final, step_implicit(u0, 1, problem, config))
        assert np.array_equal(traj.times, [0.0, 1.0])

    def test_short_history_rejected(self):
        problem = _heat(0.5, 8)
        with pytest.raises(ParameterError):
            step_linearized(np.zeros((2, 7)), 3, problem, SchemeConfig(4))


class TestFailures:
    def test_newton_exhaustion_names_step(self):
        problem = example2("b", 0.5, M=20)
        with pytest.raises(ConvergenceError, match="step 1"):
            solve(problem, SchemeConfig(4, newton_max_iter=1, newton_tol=1e-300))

    def test_blow_up_is_a_solver_error(self):
        problem = _heat(0.5, 8, f=lambda u: np.full_like(u, np.inf), df=_zero)
        with pytest.raises(SolverError) as info:
            solve(problem, SchemeConfig(4))
        assert info.value.step == 1

    def test_linearized_blow_up(self):
        problem = _heat(0.5, 8, f=lambda u: np.full_like(u, np.inf), df=_zero)
        with pytest.raises(SolverError, match="step 1"):
            solve(problem, SchemeConfig(4, Variant.LINEARIZED))

    def test_bad_config(self):
        with pytest.raises(ParameterError):
            SchemeConfig(0)
        with pytest.raises(ValueError):
            SchemeConfig(4, variant="explicit")


class TestAccuracy:
    def test_example1_coarse_error(self):
        problem = example1(0.4, 0.4, 1000)
        error = np.max(np.abs(solve(problem, SchemeConfig(10)).final - problem.exact_field(1.0)))
        assert error == pytest.approx(1.12e-2, rel=0.05)

    def test_mittag_leffler_mode(self):
        alpha, M, N = 0.5, 32, 2048
        problem = _heat(alpha, M)
        traj = solve(problem, SchemeConfig(N))
        lam_h = problem.grid.discrete_eigenvalue(1)
        u0 = problem.initial_field()
        for n in (N // 4, N // 2, 3 * N // 4, N):
            t = traj.times[n]
            mode = mittag_leffler(alpha, 1.0, -lam_h * t**alpha) * u0
            assert np.max(np.abs(traj.fields[n] - mode)) <= 1e-3

    @pytest.mark.parametrize("alpha, sigma", [(0.4, 0.4), (0.6, 0.8), (0.4, 0.1)])
    def test_pointwise_error_shape(self, alpha, sigma):
        # error(t_n) t_n^(1 - alpha) / tau^(sigma + 1 - alpha) stays bounded
        # over n >= N/4 as N doubles
        sups = []
        for N in (20, 40, 80, 160):
            problem = example1(alpha, sigma, 400)
            traj = solve(problem, SchemeConfig(N))
            tau = 1.0 / N
            ns = np.arange(N // 4, N + 1)
            err = np.array([
                np.max(np.abs(traj.fields[n] - problem.exact_field(n * tau))) for n in ns
            ])
            sups.append(np.max(err * (ns * tau) ** (1 - alpha) / tau ** (sigma + 1 - alpha)))
        assert max(sups) / min(sups) < 1.5


class TestProblems:
    def test_example2_domains(self):
        for case, (dim, L, *_) in EXAMPLE2_CASES.items():
            problem = example2(case, 0.5)
            assert problem.grid.dim == dim
            assert problem.grid.L == L == 1.0
            assert problem.grid.M == (1000 if dim == 1 else 10)

    def test_example2_initial_data_vanish_on_boundary(self):
        for case in EXAMPLE2_CASES:
            problem = example2(case, 0.5, M=8)
            grid = problem.grid
            edge = np.array([0.0, grid.L])
            if grid.dim == 1:
                values = problem.u0(edge)
            else:
                s = np.linspace(0, grid.L, 5)
                values = np.concatenate([
                    problem.u0(edge[:, None], s[None, :]).ravel(),
                    problem.u0(s[None, :], edge[:, None]).ravel(),
                ])
            np.testing.assert_allclose(values, 0.0, atol=1e-15)

    def test_example2_domain_override(self):
        assert example2("d", 0.5, L=np.pi).grid.L == np.pi
        with pytest.raises(ParameterError):
            example2("d", 0.5, L=-1.0)
        with pytest.raises(ParameterError):
            example2("e", 0.5)

    def test_example1_forcing_reproduces_solution(self):
        # residual of the continuous equation at the exact solution is zero
        problem = example1(0.3, 1.2, 10)
        x = problem.grid.axis
        t = 0.7
        u = problem.exact(x, t)
        caputo = gamma(2.2) / gamma(1.9) * t**0.9 * np.sin(x)
        residual = caputo + u - problem.f(u) - problem.source(x, t)  # -u_xx = u
        np.testing.assert_allclose(residual, 0.0, atol=1e-14)
