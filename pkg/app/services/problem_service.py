"""Problem service module."""

from typing import Any, Optional

import numpy as np
import sympy as sp
from loguru import logger

from app.exceptions import InvalidStiffnessError, ProblemValidationError, UnknownProblemError
from app.models.domain.problem import T, Y, ProblemInstance, SemilinearProblem, SolutionTerm, state_derivative
from app.models.enums import ProblemName
from app.models.schemas.problem import DerivativeCheck, ProblemDiagnostics

MOL_POINTS = 50
LIPSCHITZ_GRID = np.linspace(-10.0, 10.0, 20001)
CONSISTENCY_TIMES = 20
FD_STEP = 1e-5
FD_TOLERANCE = 1e-6
ROUNDING_SLACK = 64.0
EPS = float(np.finfo(float).eps)


def _smooth_step(x: sp.Expr) -> sp.Expr:
    """C-infinity transition: 0 for x <= 0, 1 for x >= 1."""
    rise, fall = sp.exp(-1 / x), sp.exp(-1 / (1 - x))
    return sp.Piecewise((0, x <= 0), (1, x >= 1), (rise / (rise + fall), True))


def _clipped_cubic() -> sp.Expr:
    """y - y^3 on [-2, 2], smoothly switched off outside [-3, 3]."""
    cubic = Y - Y**3
    return sp.Piecewise(
        (cubic, sp.Abs(Y) <= 2),
        (0, sp.Abs(Y) >= 3),
        (cubic * _smooth_step(3 - Y) * _smooth_step(3 + Y), True),
    )


def grid_lipschitz(nonlinearity: tuple[Any, ...]) -> float:
    """max |phi_m'| over a grid of [-10, 10]."""
    bound = 0.0
    for expr in set(nonlinearity):
        with np.errstate(all="ignore"):
            values = np.asarray(state_derivative(expr, 1)(LIPSCHITZ_GRID), dtype=float)
        values = np.broadcast_to(values, LIPSCHITZ_GRID.shape)
        bound = max(bound, float(np.nanmax(np.abs(values))))
    return bound


def dirichlet_laplacian(points: int) -> np.ndarray:
    """(n+1)^2 tridiag(1, -2, 1) on the interior points of [0, 1]."""
    main = -2.0 * np.ones(points)
    off = np.ones(points - 1)
    return (points + 1) ** 2 * (np.diag(main) + np.diag(off, 1) + np.diag(off, -1))


class ProblemService:
    """Builtin semilinear test problems and their validation."""

    def names(self) -> list[str]:
        return [name.value for name in ProblemName]

    def builtin_problem(self, name: str, stiffness: float, validate: bool = True) -> SemilinearProblem:
        """Construct a builtin problem for the stiffness parameter ``stiffness`` < 0."""
        if name not in self.names():
            raise UnknownProblemError(name, self.names())
        if not stiffness < 0:
            raise InvalidStiffnessError(stiffness)

        if name == ProblemName.NPR_SCALAR:
            problem = SemilinearProblem(
                name=name,
                J=np.array([[stiffness]], dtype=float),
                nonlinearity=(sp.sin(Y),),
                solution=(SolutionTerm(vector=np.ones(1), profile=sp.cos(T)),),
                lipschitz=1.0,
                stiffness=stiffness,
            )
        elif name == ProblemName.NPR_2D:
            nonlinearity = (Y**2 / (1 + Y**2), sp.sin(Y))
            problem = self.shift_to_dissipative(
                SemilinearProblem(
                    name=name,
                    J=np.array([[stiffness, 1.0], [0.0, stiffness / 2.0]]),
                    nonlinearity=nonlinearity,
                    solution=(
                        SolutionTerm(vector=np.array([1.0, 0.0]), profile=sp.cos(T)),
                        SolutionTerm(vector=np.array([0.0, 1.0]), profile=sp.sin(T)),
                    ),
                    lipschitz=grid_lipschitz(nonlinearity),
                    stiffness=stiffness,
                )
            )
        else:
            nonlinearity = (_clipped_cubic(),) * MOL_POINTS
            x = np.arange(1, MOL_POINTS + 1) / (MOL_POINTS + 1)
            problem = SemilinearProblem(
                name=name,
                J=abs(stiffness) * dirichlet_laplacian(MOL_POINTS),
                nonlinearity=nonlinearity,
                solution=(SolutionTerm(vector=np.sin(np.pi * x), profile=sp.cos(T)),),
                lipschitz=grid_lipschitz(nonlinearity),
                smoothness=5,
                stiffness=stiffness,
            )

        logger.debug("Built problem", problem=name, stiffness=stiffness, dimension=problem.N, mu=problem.mu)
        if validate:
            diagnostics = self.validate(problem)
            if not diagnostics.ok:
                raise ProblemValidationError(name, diagnostics.failures())
        return problem

    def from_instance(self, instance: ProblemInstance) -> SemilinearProblem:
        return self.builtin_problem(instance.name, instance.stiffness)

    @staticmethod
    def shift_to_dissipative(problem: SemilinearProblem) -> SemilinearProblem:
        """J -> J - mu I and g -> g + mu y when mu(J) > 0; the exact solution is unchanged."""
        mu = problem.mu
        if mu <= 0:
            return problem
        logger.debug("Shifting problem to a dissipative linear part", problem=problem.name, mu=mu)
        return problem.replace(
            J=problem.J - mu * np.eye(problem.N),
            nonlinearity=tuple(expr + mu * Y for expr in problem.nonlinearity),
            lipschitz=problem.lipschitz + mu,
        )

    def validate(
        self,
        problem: SemilinearProblem,
        t0: float = 0.0,
        tf: float = 1.0,
        seed: int = 0,
    ) -> ProblemDiagnostics:
        """Consistency of the manufactured solution, dissipativity and finite-difference derivative checks."""
        rng = np.random.default_rng(seed)
        times = np.linspace(t0, tf, CONSISTENCY_TIMES)

        consistency = 0.0
        for t in times:
            y = problem.exact(t)
            dy = problem.exact(t, 1)
            g, r = problem.g(y), problem.forcing(t)
            residual = np.linalg.norm(dy - (problem.J @ y + g + r))
            # rounding floor of evaluating J y + g + r
            floor = ROUNDING_SLACK * EPS * np.linalg.norm(np.abs(problem.J) @ np.abs(y) + np.abs(g) + np.abs(r))
            consistency = max(consistency, float(max(residual - floor, 0.0) / (1.0 + np.linalg.norm(dy))))

        g_checks = [
            self._check_g_derivative(problem, k, times, rng) for k in range(1, min(problem.smoothness, 3) + 1)
        ]
        y_checks = [self._check_solution_derivative(problem, k, times) for k in range(1, 5)]
        diagnostics = ProblemDiagnostics(
            problem=problem.name,
            dimension=problem.N,
            stiffness=problem.stiffness,
            mu=problem.mu,
            mu_ok=problem.mu <= 1e-12 * max(1.0, float(np.max(np.abs(problem.J)))),
            lipschitz=problem.lipschitz,
            consistency_residual=consistency,
            consistency_ok=consistency <= 1e-10,
            g_derivatives=g_checks,
            solution_derivatives=y_checks,
        )
        log = logger.bind(problem=problem.name, stiffness=problem.stiffness)
        if diagnostics.ok:
            log.debug("Problem validated", consistency=consistency, mu=problem.mu)
        else:
            log.warning("Problem validation failed", failures=diagnostics.failures())
        return diagnostics

    @staticmethod
    def _check_g_derivative(
        problem: SemilinearProblem, k: int, times: np.ndarray, rng: np.random.Generator
    ) -> DerivativeCheck:
        """Central differences of g^(k-1) along the last direction against g^(k)."""
        worst = 0.0
        for t in times[::4]:
            y = problem.exact(t) + 0.1 * rng.standard_normal(problem.N)
            directions = [rng.standard_normal(problem.N) for _ in range(k)]
            exact = problem.g_derivative(k, y, *directions)
            last = directions[-1]
            forward = problem.g_derivative(k - 1, y + FD_STEP * last, *directions[:-1])
            backward = problem.g_derivative(k - 1, y - FD_STEP * last, *directions[:-1])
            estimate = (forward - backward) / (2 * FD_STEP)
            error = float(np.max(np.abs(estimate - exact) / (1.0 + np.abs(exact))))
            worst = max(worst, error)
        return DerivativeCheck(order=k, max_error=worst, ok=worst <= FD_TOLERANCE)

    @staticmethod
    def _check_solution_derivative(problem: SemilinearProblem, k: int, times: np.ndarray) -> DerivativeCheck:
        worst = 0.0
        for t in times[::4]:
            exact = problem.exact(t, k)
            estimate = (problem.exact(t + FD_STEP, k - 1) - problem.exact(t - FD_STEP, k - 1)) / (2 * FD_STEP)
            worst = max(worst, float(np.max(np.abs(estimate - exact) / (1.0 + np.abs(exact)))))
        return DerivativeCheck(order=k, max_error=worst, ok=worst <= FD_TOLERANCE)

    def with_forcing(self, problem: SemilinearProblem, forcing: Optional[Any]) -> SemilinearProblem:
        """Copy of ``problem`` with an explicit forcing r(t)."""
        return problem.replace(forcing_override=forcing)
