"""Unit tests for SolverService."""

import numpy as np
import pytest

from app.exceptions import IncommensurateStepError, NewtonConvergenceError, SingularStageMatrixError, StepFailedError
from app.models.domain.tableau import ButcherTableau
from app.models.enums import JacobianMode
from app.models.schemas.solver import NewtonConfig
from app.repositories.tableau_repository import TableauRepository
from app.services.problem_service import ProblemService
from app.services.solver_service import SolverService, factor
from app.services.stability_service import StabilityService
from app.services.study_service import stiffness_growth


class TestStepCount:
    """Test suite for the uniform grid."""

    def test_commensurate(self, solver_service: SolverService) -> None:
        """Test an exact power-of-two step."""
        assert solver_service.step_count(0.0, 1.0, 0.125) == 8

    def test_empty_interval(self, solver_service: SolverService) -> None:
        """Test that t0 = tf gives no steps."""
        assert solver_service.step_count(0.5, 0.5, 0.1) == 0

    @pytest.mark.parametrize("h", [0.3, 0.0, -0.125, 2.0])
    def test_incommensurate(self, solver_service: SolverService, h: float) -> None:
        """Test that steps not dividing the interval are rejected."""
        with pytest.raises(IncommensurateStepError):
            solver_service.step_count(0.0, 1.0, h)


class TestRkStep:
    """Test suite for a single Runge-Kutta step."""

    def test_zero_step(
        self, solver_service: SolverService, problem_service: ProblemService, gauss2: ButcherTableau
    ) -> None:
        """Test that h = 0 returns the state unchanged."""
        problem = problem_service.builtin_problem("npr-2d", -1e2)
        y = problem.exact(0.0)

        result = solver_service.rk_step(gauss2, problem, 0.0, y, 0.0)

        assert np.array_equal(result.y_next, y)
        assert result.total_iterations == 0

    def test_negative_step(
        self, solver_service: SolverService, problem_service: ProblemService, trapezoid: ButcherTableau
    ) -> None:
        """Test that backward steps are refused."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        with pytest.raises(ValueError):
            solver_service.rk_step(trapezoid, problem, 0.0, problem.exact(0.0), -0.1)

    @pytest.mark.parametrize("name", ["trapezoid", "sdirk-norsett-3", "backward-euler"])
    def test_block_matches_sequential(
        self,
        solver_service: SolverService,
        problem_service: ProblemService,
        tableau_repository: TableauRepository,
        name: str,
    ) -> None:
        """Test that DIRK stages solved as one system agree with the stage-by-stage solve."""
        tableau = tableau_repository.get(name)
        problem = problem_service.builtin_problem("npr-2d", -1e3)
        y = problem.exact(0.2)

        sequential = solver_service.rk_step(tableau, problem, 0.2, y, 0.05)
        block = solver_service.rk_step(tableau, problem, 0.2, y, 0.05, force_block=True)

        assert np.allclose(sequential.y_next, block.y_next, rtol=0, atol=1e-10)
        assert np.allclose(sequential.stages, block.stages, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("name", ["gauss-2", "radau-iia-2", "sdirk-norsett-3"])
    def test_stage_residuals_are_measured(
        self,
        solver_service: SolverService,
        problem_service: ProblemService,
        tableau_repository: TableauRepository,
        name: str,
    ) -> None:
        """Test that residuals are Y - y - h A f(Y) at the returned stages."""
        tableau = tableau_repository.get(name)
        problem = problem_service.builtin_problem("npr-2d", -1e3)
        t, h = 0.2, 0.05
        y = problem.exact(t)

        result = solver_service.rk_step(tableau, problem, t, y, h)

        forcing = np.array([problem.forcing(t + ci * h) for ci in tableau.c_float])
        slopes = result.stages @ problem.J.T + np.array([problem.g(row) for row in result.stages]) + forcing
        expected = np.linalg.norm(result.stages - y - h * (tableau.A_float @ slopes), axis=1)
        assert all(result.converged)
        assert np.allclose(result.residuals, expected, rtol=1e-8, atol=1e-14)
        assert max(result.residuals) <= 1e-6

    def test_explicit_stages_take_no_newton(
        self, solver_service: SolverService, problem_service: ProblemService, rk4: ButcherTableau
    ) -> None:
        """Test that zero diagonal entries are forward substitutions."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        result = solver_service.rk_step(rk4, problem, 0.0, problem.exact(0.0), 0.1)

        assert result.iterations == [0, 0, 0, 0]

    def test_finite_difference_jacobian(self, solver_service: SolverService, problem_service: ProblemService) -> None:
        """Test the finite-difference Jacobian against the analytic one."""
        problem = problem_service.builtin_problem("npr-2d", -1.0)
        y = np.array([0.4, -0.7])

        analytic = solver_service.g_jacobian(problem, y, NewtonConfig())
        estimate = solver_service.g_jacobian(problem, y, NewtonConfig(jacobian=JacobianMode.FINITE_DIFFERENCE))

        assert np.allclose(analytic, estimate, rtol=0, atol=1e-6)

    def test_finite_difference_step_agrees(
        self, solver_service: SolverService, problem_service: ProblemService, radau_iia2: ButcherTableau
    ) -> None:
        """Test that the Jacobian choice does not change the converged step."""
        problem = problem_service.builtin_problem("npr-2d", -1e2)
        y = problem.exact(0.0)
        cfg = NewtonConfig(jacobian=JacobianMode.FINITE_DIFFERENCE)

        analytic = solver_service.rk_step(radau_iia2, problem, 0.0, y, 0.1)
        estimated = solver_service.rk_step(radau_iia2, problem, 0.0, y, 0.1, cfg)

        assert np.allclose(analytic.y_next, estimated.y_next, rtol=0, atol=1e-10)

    def test_newton_budget(
        self, solver_service: SolverService, problem_service: ProblemService, backward_euler: ButcherTableau
    ) -> None:
        """Test that a single Newton iteration cannot certify convergence."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        with pytest.raises(NewtonConvergenceError) as exc_info:
            solver_service.rk_step(backward_euler, problem, 0.0, problem.exact(0.0), 0.1, NewtonConfig(max_iter=1))

        assert exc_info.value.iterations == 1


class TestIntegrate:
    """Test suite for constant-step integration."""

    def test_trajectory_shape(
        self, solver_service: SolverService, problem_service: ProblemService, backward_euler: ButcherTableau
    ) -> None:
        """Test grid, states and Newton counts of a short run."""
        problem = problem_service.builtin_problem("npr-scalar", -1e2)

        trajectory = solver_service.integrate(backward_euler, problem, 0.0, 1.0, 0.125)

        assert trajectory.states.shape == (9, 1)
        assert trajectory.times[-1] == 1.0
        assert trajectory.newton_iterations[0] == 0
        assert all(count > 0 for count in trajectory.newton_iterations[1:])
        assert abs(trajectory.final[0] - np.cos(1.0)) < 0.05
        assert trajectory.header() == ["t", "y1", "newton"]
        assert len(trajectory.rows()) == 9

    def test_step_failure_is_wrapped(
        self, solver_service: SolverService, problem_service: ProblemService, backward_euler: ButcherTableau
    ) -> None:
        """Test that a Newton failure names the step."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        with pytest.raises(StepFailedError) as exc_info:
            solver_service.integrate(backward_euler, problem, 0.0, 1.0, 0.25, NewtonConfig(max_iter=1))

        assert exc_info.value.index == 0

    def test_fourth_order_accuracy(
        self, solver_service: SolverService, problem_service: ProblemService, rk4: ButcherTableau
    ) -> None:
        """Test that halving h divides the nonstiff error by about 16."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        errors = [
            abs(solver_service.integrate(rk4, problem, 0.0, 1.0, h).final[0] - np.cos(1.0)) for h in (0.125, 0.0625)
        ]

        assert np.log2(errors[0] / errors[1]) > 3.5

    def test_one_step_error_order(
        self, solver_service: SolverService, problem_service: ProblemService, backward_euler: ButcherTableau
    ) -> None:
        """Test that the local error of backward Euler is O(h^2)."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        errors = [abs(solver_service.one_step_error(backward_euler, problem, 0.5, h)[0]) for h in (1e-2, 5e-3)]

        assert np.log2(errors[0] / errors[1]) == pytest.approx(2.0, abs=0.1)


class TestStageMatrix:
    """Test suite for the linear stage algebra."""

    def test_singular_matrix(self) -> None:
        """Test that an exactly singular stage matrix is rejected."""
        with pytest.raises(SingularStageMatrixError):
            factor(np.zeros((2, 2)), "test")

    @pytest.mark.parametrize("z", [-0.5, -3.0, -1e3])
    def test_stability_matrix_is_R(
        self,
        solver_service: SolverService,
        stability_service: StabilityService,
        gauss2: ButcherTableau,
        z: float,
    ) -> None:
        """Test R(Z) v for scalar Z against the stability function."""
        R = stability_service.stability_function(gauss2)

        value = solver_service.apply_stability_matrix(gauss2, np.array([[z]]), np.array([1.0]))

        assert value[0] == pytest.approx(float(np.real(R(z))), rel=1e-10, abs=1e-12)


class TestDifferencePropagation:
    """Test suite for the mean-value form of the error propagation."""

    @pytest.mark.parametrize("name", ["trapezoid", "gauss-2", "radau-iia-2"])
    def test_identity_holds(
        self,
        solver_service: SolverService,
        problem_service: ProblemService,
        tableau_repository: TableauRepository,
        name: str,
    ) -> None:
        """Test that (R(Z) + h Lambda_n) maps the initial difference to the propagated one."""
        tableau = tableau_repository.get(name)
        problem = problem_service.builtin_problem("npr-2d", -1e2)
        y = problem.exact(0.0)
        y_tilde = y + np.array([1e-2, -2e-2])

        check = solver_service.mean_value_check(tableau, problem, 0.0, y, y_tilde, 0.1)

        assert check.identity_residual <= 1e-7
        assert check.probe_ratio <= check.lambda_norm * (1 + 1e-6) + 1e-9

    def test_probe_matches_mean_value_form(
        self, solver_service: SolverService, problem_service: ProblemService, gauss2: ButcherTableau
    ) -> None:
        """Test that both routes measure the same nonlinear part."""
        problem = problem_service.builtin_problem("npr-2d", -1e2)
        y = problem.exact(0.0)
        y_tilde = y + np.array([1e-2, 1e-2])

        ratio = solver_service.c_stability_probe(gauss2, problem, 0.0, y, y_tilde, 0.1)
        check = solver_service.mean_value_check(gauss2, problem, 0.0, y, y_tilde, 0.1)

        assert ratio == pytest.approx(check.probe_ratio, rel=1e-6)

    def test_nonlinear_part_is_stiffness_uniform(
        self, solver_service: SolverService, problem_service: ProblemService, trapezoid: ButcherTableau
    ) -> None:
        """Test that the nonlinear propagation ratio does not grow from lambda = -1e2 to -1e8."""
        ratios = {}
        for stiffness in [-1e2, -1e4, -1e6, -1e8]:
            problem = problem_service.builtin_problem("npr-scalar", stiffness)
            y = problem.exact(0.0)

            ratios[stiffness] = solver_service.c_stability_probe(trapezoid, problem, 0.0, y, y + 1e-2, 0.1)

        assert all(np.isfinite(ratio) for ratio in ratios.values())
        growth = stiffness_growth(ratios)
        assert growth is not None and growth <= 10.0

    def test_equal_initial_values(
        self, solver_service: SolverService, problem_service: ProblemService, gauss2: ButcherTableau
    ) -> None:
        """Test that a zero difference is rejected."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)
        y = problem.exact(0.0)

        with pytest.raises(ValueError):
            solver_service.c_stability_probe(gauss2, problem, 0.0, y, y.copy(), 0.1)


class TestStepSizeBound:
    """Test suite for the step-size restriction."""

    def test_backward_euler(
        self, solver_service: SolverService, problem_service: ProblemService, backward_euler: ButcherTableau
    ) -> None:
        """Test h_bar = 1 / (2 L B ||A||) with L = B = ||A|| = 1."""
        problem = problem_service.builtin_problem("npr-scalar", -1.0)

        bound = solver_service.step_size_bound(backward_euler, problem)

        assert bound.h_bar == pytest.approx(0.5, rel=1e-8)
        assert solver_service.step_size_bound(backward_euler, problem, h_tilde=0.1).h_bar == 0.1
