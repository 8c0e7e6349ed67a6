"""Solver service module."""

from typing import Callable, Optional

import numpy as np
import scipy.linalg
from loguru import logger

from app.exceptions import IncommensurateStepError, NewtonConvergenceError, SingularStageMatrixError, StepFailedError
from app.models.domain.problem import SemilinearProblem
from app.models.domain.tableau import ButcherTableau
from app.models.enums import JacobianMode, MethodStructure
from app.models.schemas.solver import MeanValueCheck, NewtonConfig, StepResult, StepSizeBound, Trajectory
from app.services.stability_service import StabilityService

STALL_RATIO = 0.9
GAUSS_LEGENDRE_NODES = 8
RESIDUAL_SLACK = 10.0

LuFactors = tuple[np.ndarray, np.ndarray]


def factor(matrix: np.ndarray, context: str) -> LuFactors:
    """LU factors of a stage matrix; exactly singular or non-finite matrices are rejected."""
    try:
        lu, piv = scipy.linalg.lu_factor(matrix)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularStageMatrixError(context) from exc
    if np.any(np.diag(lu) == 0):
        raise SingularStageMatrixError(context)
    return lu, piv


def kron_system(tableau: ButcherTableau, Z: np.ndarray) -> np.ndarray:
    """Dense I - A (x) Z."""
    return np.eye(tableau.s * Z.shape[0]) - np.kron(tableau.A_float, Z)


class SolverService:
    """Constant-step Runge-Kutta integration of y' = J y + g(y) + r(t)."""

    def __init__(self, stability_service: Optional[StabilityService] = None) -> None:
        """Initialize service."""
        self.stability_service = stability_service or StabilityService()

    @staticmethod
    def g_jacobian(problem: SemilinearProblem, y: np.ndarray, cfg: NewtonConfig) -> np.ndarray:
        if cfg.jacobian == JacobianMode.ANALYTIC:
            return problem.jacobian_g(y)
        base = problem.g(y)
        steps = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(y))
        columns = [(problem.g(y + step * unit) - base) / step for unit, step in zip(np.eye(problem.N), steps)]
        return np.column_stack(columns)

    @staticmethod
    def _newton(
        residual: Callable[[np.ndarray], np.ndarray],
        iteration_matrix: Callable[[np.ndarray], np.ndarray],
        guess: np.ndarray,
        cfg: NewtonConfig,
        atol: float,
        label: str,
    ) -> tuple[np.ndarray, int, np.ndarray]:
        """Simplified Newton with a frozen matrix; switches to full Newton after ``stall_limit`` stalled iterations.

        Returns the solution, the iteration count and the last increment.
        """
        Y = guess.copy()
        lu = factor(iteration_matrix(Y), f"stage {label}")
        previous = np.inf
        stalled = 0
        full_newton = False
        size = np.inf
        for iteration in range(1, cfg.max_iter + 1):
            if full_newton:
                lu = factor(iteration_matrix(Y), f"stage {label}")
            delta = scipy.linalg.lu_solve(lu, -residual(Y))
            Y = Y + delta
            size = float(np.linalg.norm(delta))
            if not np.isfinite(size):
                raise NewtonConvergenceError(label, iteration, size)
            if size <= atol + cfg.rtol * float(np.linalg.norm(Y)):
                return Y, iteration, delta
            stalled = stalled + 1 if size > STALL_RATIO * previous else 0
            if stalled >= cfg.stall_limit and not full_newton:
                logger.debug("Newton stalled, switching to full Newton", stage=label, iteration=iteration)
                full_newton = True
            previous = size
        raise NewtonConvergenceError(label, cfg.max_iter, size)

    def _sequential_stages(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        y: np.ndarray,
        h: float,
        forcing: np.ndarray,
        cfg: NewtonConfig,
        atol: float,
    ) -> tuple[np.ndarray, list[int]]:
        """Stage by stage for lower-triangular A; zero diagonal entries are forward substitutions."""
        A, J = tableau.A_float, problem.J
        s, N = tableau.s, problem.N
        stages = np.empty((s, N))
        slopes = np.empty((s, N))
        iterations: list[int] = []
        for i in range(s):
            known = y + h * (A[i, :i] @ slopes[:i])
            a_ii = A[i, i]
            if a_ii == 0:
                stages[i] = known
                iterations.append(0)
            else:
                r_i = forcing[i]

                def residual(Y: np.ndarray) -> np.ndarray:
                    return Y - known - h * a_ii * (J @ Y + problem.g(Y) + r_i)

                def iteration_matrix(Y: np.ndarray) -> np.ndarray:
                    return np.eye(N) - h * a_ii * (J + self.g_jacobian(problem, Y, cfg))

                stages[i], count, _ = self._newton(residual, iteration_matrix, y, cfg, atol, str(i + 1))
                iterations.append(count)
            slopes[i] = J @ stages[i] + problem.g(stages[i]) + forcing[i]
        return stages, iterations

    def _block_stages(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        y: np.ndarray,
        h: float,
        forcing: np.ndarray,
        cfg: NewtonConfig,
        atol: float,
    ) -> tuple[np.ndarray, list[int]]:
        """Newton on the stacked system Y = 1 (x) y + (A (x) Z) Y + h (A (x) I)(g(Y) + r)."""
        A, J = tableau.A_float, problem.J
        s, N = tableau.s, problem.N

        def residual(flat: np.ndarray) -> np.ndarray:
            Ys = flat.reshape(s, N)
            slopes = Ys @ J.T + np.array([problem.g(row) for row in Ys]) + forcing
            return (Ys - y - h * (A @ slopes)).ravel()

        def iteration_matrix(flat: np.ndarray) -> np.ndarray:
            Ys = flat.reshape(s, N)
            local = [J + self.g_jacobian(problem, row, cfg) for row in Ys]
            return np.eye(s * N) - h * np.block([[A[i, j] * local[j] for j in range(s)] for i in range(s)])

        flat, count, _ = self._newton(residual, iteration_matrix, np.tile(y, s), cfg, atol, "block")
        return flat.reshape(s, N), [count] * s

    @staticmethod
    def _update(
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        y: np.ndarray,
        h: float,
        stages: np.ndarray,
        forcing: np.ndarray,
    ) -> np.ndarray:
        """y_{n+1} = y_n + h sum b_i f_i, evaluated without multiplying stage errors by J when possible."""
        if tableau.stiffly_accurate:
            return stages[-1].copy()
        A, b = tableau.A_float, tableau.b_float
        if np.linalg.matrix_rank(A) == tableau.s:
            # h F = (A^-1 (x) I)(Y - 1 (x) y_n)
            weights = np.linalg.solve(A.T, b)
            return y + weights @ (stages - y)
        slopes = stages @ problem.J.T + np.array([problem.g(row) for row in stages]) + forcing
        return y + h * (b @ slopes)

    def rk_step(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t: float,
        y: np.ndarray,
        h: float,
        cfg: Optional[NewtonConfig] = None,
        force_block: bool = False,
    ) -> StepResult:
        """One step from (t, y); ``force_block`` solves DIRK stages as one stacked system."""
        cfg = cfg or NewtonConfig()
        y = np.asarray(y, dtype=float)
        s = tableau.s
        if h < 0:
            raise ValueError(f"step size must be nonnegative, got {h}")
        if h == 0:
            return StepResult(
                y_next=y.copy(),
                stages=np.tile(y, (s, 1)),
                iterations=[0] * s,
                converged=[True] * s,
                residuals=[0.0] * s,
            )

        forcing = np.array([problem.forcing(t + ci * h) for ci in tableau.c_float])
        atol = cfg.absolute_tolerance(problem.N)
        if force_block or tableau.structure == MethodStructure.FULLY_IMPLICIT:
            stages, iterations = self._block_stages(tableau, problem, y, h, forcing, cfg, atol)
        else:
            stages, iterations = self._sequential_stages(tableau, problem, y, h, forcing, cfg, atol)
        residuals, converged = self._stage_residuals(tableau, problem, y, h, stages, forcing, cfg, atol)
        if not all(converged):
            logger.warning("Accepted stages miss the stage equations", tableau=tableau.name, residuals=residuals)
        return StepResult(
            y_next=self._update(tableau, problem, y, h, stages, forcing),
            stages=stages,
            iterations=iterations,
            converged=converged,
            residuals=residuals,
        )

    @staticmethod
    def _stage_residuals(
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        y: np.ndarray,
        h: float,
        stages: np.ndarray,
        forcing: np.ndarray,
        cfg: NewtonConfig,
        atol: float,
    ) -> tuple[list[float], list[bool]]:
        """||Y_i - y - h sum_j a_ij f(Y_j)|| and whether it is within the Newton tolerance.

        The tolerance of stage i is the increment tolerance scaled by 1 + h sum_j |a_ij| (||J|| + L),
        the norm of the stage operator the increment passes through.
        """
        A = tableau.A_float
        slopes = stages @ problem.J.T + np.array([problem.g(row) for row in stages]) + forcing
        norms = np.linalg.norm(stages - y - h * (A @ slopes), axis=1)
        operator = np.linalg.norm(problem.J, ord=np.inf) + problem.lipschitz
        limits = [
            RESIDUAL_SLACK
            * (atol + cfg.rtol * float(np.linalg.norm(stage)))
            * (1.0 + h * float(np.sum(np.abs(row))) * operator)
            for stage, row in zip(stages, A)
        ]
        return [float(norm) for norm in norms], [bool(norm <= limit) for norm, limit in zip(norms, limits)]

    def integrate(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t0: float,
        tf: float,
        h: float,
        cfg: Optional[NewtonConfig] = None,
        y0: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """Uniform steps from t0 to tf starting at y0 (default: the exact solution at t0)."""
        steps = self.step_count(t0, tf, h)
        cfg = cfg or NewtonConfig()
        y = problem.exact(t0) if y0 is None else np.asarray(y0, dtype=float)
        times = t0 + np.arange(steps + 1) * h
        states = np.empty((steps + 1, problem.N))
        states[0] = y
        newton = [0]
        log = logger.bind(tableau=tableau.name, problem=problem.name, h=h)
        log.debug("Integrating", steps=steps, t0=t0, tf=tf)
        for n in range(steps):
            try:
                result = self.rk_step(tableau, problem, float(times[n]), states[n], h, cfg)
            except (NewtonConvergenceError, SingularStageMatrixError) as exc:
                log.warning("Step failed", index=n, time=float(times[n]), reason=exc.detail)
                raise StepFailedError(n, float(times[n]), exc.detail) from exc
            states[n + 1] = result.y_next
            newton.append(result.total_iterations)
        log.debug("Integration finished", steps=steps, newton_total=sum(newton))
        return Trajectory(
            tableau=tableau.name, problem=problem.name, h=h, times=times, states=states, newton_iterations=newton
        )

    @staticmethod
    def step_count(t0: float, tf: float, h: float) -> int:
        """Number of uniform steps; (tf - t0)/h must be within half an ulp of an integer."""
        span = tf - t0
        if span == 0:
            return 0
        if h <= 0 or span < 0:
            raise IncommensurateStepError(t0, tf, h)
        ratio = span / h
        steps = round(ratio)
        if steps < 1 or abs(ratio - steps) > 0.5 * np.spacing(float(steps)):
            raise IncommensurateStepError(t0, tf, h)
        return steps

    def one_step_error(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t0: float,
        h: float,
        cfg: Optional[NewtonConfig] = None,
    ) -> np.ndarray:
        """y(t0 + h) - y_1 from exact initial data."""
        result = self.rk_step(tableau, problem, t0, problem.exact(t0), h, cfg)
        return problem.exact(t0 + h) - result.y_next

    def apply_stability_matrix(self, tableau: ButcherTableau, Z: np.ndarray, v: np.ndarray) -> np.ndarray:
        """R(Z) v = v + (b^T (x) Z)(I - A (x) Z)^-1 (1 (x) v)."""
        Z = np.atleast_2d(Z)
        lu = factor(kron_system(tableau, Z), "I - A (x) Z")
        U = scipy.linalg.lu_solve(lu, np.tile(v, tableau.s)).reshape(tableau.s, -1)
        return v + Z @ (tableau.b_float @ U)

    def _step_pair(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t: float,
        y: np.ndarray,
        y_tilde: np.ndarray,
        h: float,
        cfg: Optional[NewtonConfig],
    ) -> tuple[StepResult, StepResult, np.ndarray]:
        difference = np.asarray(y, dtype=float) - np.asarray(y_tilde, dtype=float)
        if not np.any(difference):
            raise ValueError("the two initial values must differ")
        first = self.rk_step(tableau, problem, t, y, h, cfg)
        second = self.rk_step(tableau, problem, t, y_tilde, h, cfg)
        return first, second, difference

    def c_stability_probe(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t: float,
        y: np.ndarray,
        y_tilde: np.ndarray,
        h: float,
        cfg: Optional[NewtonConfig] = None,
    ) -> float:
        """||(y_{n+1} - y~_{n+1}) - R(Z)(y_n - y~_n)|| / (h ||y_n - y~_n||) with Z = hJ."""
        first, second, difference = self._step_pair(tableau, problem, t, y, y_tilde, h, cfg)
        propagated = first.y_next - second.y_next
        linear = self.apply_stability_matrix(tableau, h * problem.J, difference)
        return float(np.linalg.norm(propagated - linear) / (h * np.linalg.norm(difference)))

    def mean_value_check(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t: float,
        y: np.ndarray,
        y_tilde: np.ndarray,
        h: float,
        cfg: Optional[NewtonConfig] = None,
    ) -> MeanValueCheck:
        """Assemble the mean-value matrix Lambda_n and check the difference propagation identity."""
        cfg = cfg or NewtonConfig()
        first, second, difference = self._step_pair(tableau, problem, t, y, y_tilde, h, cfg)
        s, N = tableau.s, problem.N
        nodes, weights = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_NODES)
        thetas, weights = 0.5 * (nodes + 1.0), 0.5 * weights
        blocks = []
        for stage, stage_tilde in zip(first.stages, second.stages):
            segment = stage - stage_tilde
            blocks.append(
                sum(w * self.g_jacobian(problem, stage_tilde + theta * segment, cfg) for theta, w in zip(thetas, weights))
            )
        G = scipy.linalg.block_diag(*blocks)

        Z = h * problem.J
        identity = np.eye(N)
        K = kron_system(tableau, Z)
        lu = factor(K, "I - A (x) Z")
        K_inv_ones = scipy.linalg.lu_solve(lu, np.kron(np.ones((s, 1)), identity))
        K_inv_A = scipy.linalg.lu_solve(lu, np.kron(tableau.A_float, identity))
        b_kron = np.kron(tableau.b_float[None, :], identity)
        inner = np.eye(s * N) - h * K_inv_A @ G
        stage_map = np.linalg.solve(inner, K_inv_ones)
        mean_value = b_kron @ scipy.linalg.lu_solve(lu, G @ stage_map)

        R_Z = identity + Z @ (b_kron @ K_inv_ones)
        propagated = first.y_next - second.y_next
        predicted = (R_Z + h * mean_value) @ difference
        scale = max(float(np.linalg.norm(propagated)), np.finfo(float).tiny)
        return MeanValueCheck(
            lambda_norm=float(np.linalg.norm(mean_value, 2)),
            identity_residual=float(np.linalg.norm(propagated - predicted)) / scale,
            probe_ratio=float(np.linalg.norm(propagated - R_Z @ difference) / (h * np.linalg.norm(difference))),
        )

    def step_size_bound(
        self, tableau: ButcherTableau, problem: SemilinearProblem, h_tilde: Optional[float] = None
    ) -> StepSizeBound:
        """h_bar = min(h_tilde, 1 / (2 L B ||A||)) with B the sampled sup of ||(I - zA)^-1||."""
        resolvent = self.stability_service.resolvent_sup(tableau)
        a_norm = float(np.linalg.norm(tableau.A_float, 2))
        denominator = 2.0 * problem.lipschitz * resolvent * a_norm
        bound = np.inf if denominator == 0 else 1.0 / denominator
        if h_tilde is not None:
            bound = min(bound, h_tilde)
        logger.debug("Step size bound", tableau=tableau.name, problem=problem.name, h_bar=bound)
        return StepSizeBound(
            lipschitz=problem.lipschitz, resolvent_sup=resolvent, a_norm=a_norm, h_tilde=h_tilde, h_bar=float(bound)
        )
