"""Local truncation error expansions of a Runge-Kutta step on a semilinear problem.

The one-step error y(t0 + h) - y_1 is expanded in powers of h at a fixed Z = hJ in two ways: as a sum over
rooted trees (each tree contributes zeta(tree) * psi(tree)) and by the direct coefficient recursion through
the stage errors. Both apply (I - A (x) Z)^-1 through one dense LU factorization, so they agree to round-off.
"""

import itertools
from functools import lru_cache
from typing import Any, Optional, Sequence

import numpy as np
import scipy.linalg
from loguru import logger
from sympy.utilities.iterables import multiset_partitions

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import UnavailableDerivativeError
from app.models.domain.problem import SemilinearProblem
from app.models.domain.tableau import ButcherTableau, DefectPair
from app.models.domain.tree import RootedTree
from app.models.schemas.lte import LteCheck, LteSeries, LteVerification, RemainderProbe
from app.models.schemas.solver import NewtonConfig
from app.services.arithmetic import FloatAlgebra
from app.services.condition_service import ConditionService
from app.services.problem_service import ProblemService
from app.services.solver_service import SolverService, factor, kron_system
from app.services.study_service import estimate_order
from app.services.tableau_service import TableauService
from app.services.tree_service import TreeService, default_weight

MAX_SERIES_ORDER = 5
VANISH_TOLERANCE = 1e-9
AGREEMENT_TOLERANCE = 1e-10


@lru_cache(maxsize=None)
def _partition_sizes(ell: int) -> tuple[tuple[int, ...], ...]:
    """Block sizes of every set partition of {1, ..., ell}."""
    if ell == 0:
        return ((),)
    return tuple(tuple(len(block) for block in partition) for partition in multiset_partitions(list(range(ell))))


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    return tuple(m for m in itertools.product(range(1, total + 1), repeat=parts) if sum(m) == total)


def _symmetrize(tensor: np.ndarray) -> np.ndarray:
    """Average over permutations of the k input axes (all but the first)."""
    k = tensor.ndim - 1
    permutations = list(itertools.permutations(range(1, k + 1)))
    return sum(np.transpose(tensor, (0, *perm)) for perm in permutations) / len(permutations)


def _apply(tensor: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = tensor
    for vector in reversed(vectors):
        out = out @ vector
    return out


class _Expansion:
    """Evaluation context for one (tableau, problem, t, Z); memoizes psi per tree."""

    def __init__(self, tableau: ButcherTableau, problem: SemilinearProblem, t: float, Z: np.ndarray) -> None:
        self.problem = problem
        self.t = t
        self.Z = np.atleast_2d(np.asarray(Z, dtype=float))
        self.A, self.b, self.c = tableau.A_float, tableau.b_float, tableau.c_float
        self.s, self.N = tableau.s, problem.N
        self.lu = factor(kron_system(tableau, self.Z), f"I - A (x) Z for tableau {tableau.name}")
        self.algebra = FloatAlgebra(tableau.to_float())
        self.y = problem.exact(t)
        self._derivatives: dict[int, np.ndarray] = {}
        self._defects: dict[int, DefectPair] = {}
        self._psi: dict[RootedTree, tuple[np.ndarray, np.ndarray]] = {}

    def solve(self, U: np.ndarray) -> np.ndarray:
        """(I - A (x) Z)^-1 applied to an s x N stage array."""
        return scipy.linalg.lu_solve(self.lu, U.ravel()).reshape(self.s, self.N)

    def derivative(self, i: int) -> np.ndarray:
        if i not in self._derivatives:
            self._derivatives[i] = self.problem.exact(self.t, i)
        return self._derivatives[i]

    def defect(self, i: int) -> DefectPair:
        if i not in self._defects:
            self._defects[i] = TableauService.defect_pair_in(self.algebra, i)
        return self._defects[i]

    def source(self, i: int) -> np.ndarray:
        """s_hat_i (x) y^(i)(t)."""
        return np.outer(self.defect(i).s_hat, self.derivative(i))

    def bushy_step(self, i: int, stage: np.ndarray) -> np.ndarray:
        """q_hat_i y^(i) + (b^T (x) Z) stage."""
        return self.defect(i).q_hat * self.derivative(i) + self.Z @ (self.b @ stage)

    def G(self, k: int, ell: int, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Blockwise d^ell/dt^ell g^(k)(y(t)) applied to k stage arrays (chain rule over set partitions)."""
        out = np.zeros((self.s, self.N))
        partitions = _partition_sizes(ell)
        for j in range(self.s):
            arguments = [block[j] for block in blocks]
            for sizes in partitions:
                extra = [self.derivative(size) for size in sizes]
                out[j] += self.problem.g_derivative(k + len(sizes), self.y, *arguments, *extra)
        return out

    def psi(self, tree: RootedTree) -> tuple[np.ndarray, np.ndarray]:
        """(psi~ stage array, psi step vector) of a tree."""
        if tree in self._psi:
            return self._psi[tree]
        if tree.is_bushy:
            i = tree.ell + 1
            stage = self.solve(self.source(i))
            result = (stage, self.bushy_step(i, stage))
        else:
            children = [self.psi(child)[0] for child in tree.children]
            weighted = (self.c ** tree.ell)[:, None] * self.G(tree.k, tree.ell, children)
            result = (self.solve(self.A @ weighted), self.b @ self.solve(weighted))
        self._psi[tree] = result
        return result

    def direct(self, max_order: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Coefficient recursion: stage errors Delta Y^(i), step errors delta y^(i), nonlinear terms Delta g^(i)."""
        stage: dict[int, np.ndarray] = {}
        step: dict[int, np.ndarray] = {}
        for i in range(1, max_order + 1):
            nonlinear = self.nonlinear_term(i - 1, stage)
            forced = self.solve(self.source(i))
            stage[i] = forced + self.solve(self.A @ nonlinear)
            step[i] = self.bushy_step(i, forced) + self.b @ self.solve(nonlinear)
        return [step[i] for i in range(1, max_order + 1)], [stage[i] for i in range(1, max_order + 1)]

    def nonlinear_term(self, i: int, stage: dict[int, np.ndarray]) -> np.ndarray:
        """Delta g^(i) = sum over ell, k and compositions m of (i - ell) of the weighted G^(k),ell terms."""
        total = np.zeros((self.s, self.N))
        for ell in range(i):
            for k in range(1, i - ell + 1):
                weight = float(default_weight(ell, k))
                scale = (self.c**ell)[:, None]
                for m in _compositions(i - ell, k):
                    total += weight * scale * self.G(k, ell, [stage[index] for index in m])
        return total


class LteService:
    """Defects, tree and direct error expansions, and their consistency checks."""

    def __init__(
        self,
        tree_service: Optional[TreeService] = None,
        solver_service: Optional[SolverService] = None,
        condition_service: Optional[ConditionService] = None,
        problem_service: Optional[ProblemService] = None,
    ) -> None:
        """Initialize service."""
        self.tree_service = tree_service or TreeService()
        self.solver_service = solver_service or SolverService()
        self.condition_service = condition_service or ConditionService(tree_service=self.tree_service)
        self.problem_service = problem_service or ProblemService()

    @staticmethod
    def _check_order(problem: SemilinearProblem, max_order: int) -> None:
        available = min(problem.smoothness, MAX_SERIES_ORDER)
        if not 1 <= max_order <= available:
            raise UnavailableDerivativeError("error series", max_order, available)

    def defects(
        self, tableau: ButcherTableau, problem: SemilinearProblem, t0: float, h: float, r: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Truncated defects Delta_0 = sum h^i s_hat_i (x) y^(i)(t0) and delta_0 = sum h^i q_hat_i y^(i)(t0)."""
        if h < 0:
            raise ValueError(f"step size must be nonnegative, got {h}")
        if r > problem.smoothness:
            raise UnavailableDerivativeError("defect expansion", r, problem.smoothness)
        algebra = FloatAlgebra(tableau.to_float())
        stage = np.zeros((tableau.s, problem.N))
        step = np.zeros(problem.N)
        for i in range(1, r + 1):
            pair = TableauService.defect_pair_in(algebra, i)
            derivative = problem.exact(t0, i)
            stage += h**i * np.outer(pair.s_hat, derivative)
            step += h**i * pair.q_hat * derivative
        return stage, step

    @staticmethod
    def exact_stage_defects(
        tableau: ButcherTableau, problem: SemilinearProblem, t0: float, h: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Residuals of the stage and step relations with the exact solution substituted."""
        y0 = problem.exact(t0)
        times = t0 + tableau.c_float * h
        exact_stages = np.array([problem.exact(t) for t in times])
        slopes = np.array([problem.rhs(t, y) for t, y in zip(times, exact_stages)])
        stage = exact_stages - y0 - h * (tableau.A_float @ slopes)
        step = problem.exact(t0 + h) - y0 - h * (tableau.b_float @ slopes)
        return stage, step

    def psi(
        self, tableau: ButcherTableau, tree: RootedTree, problem: SemilinearProblem, Z: np.ndarray, t: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Stage (s x N) and step (N) contributions of one tree."""
        self._check_order(problem, tree.order)
        return _Expansion(tableau, problem, t, Z).psi(tree)

    def lte_series_tree(
        self, tableau: ButcherTableau, problem: SemilinearProblem, t0: float, Z: np.ndarray, max_order: int
    ) -> LteSeries:
        """Coefficient of h^i = sum over trees of order i of zeta(tree) psi(tree)."""
        self._check_order(problem, max_order)
        expansion = _Expansion(tableau, problem, t0, Z)
        step, stage = [], []
        for order in range(1, max_order + 1):
            step_sum = np.zeros(problem.N)
            stage_sum = np.zeros((tableau.s, problem.N))
            for tree in self.tree_service.enumerate_trees(order):
                zeta = float(self.tree_service.zeta(tree))
                tree_stage, tree_step = expansion.psi(tree)
                step_sum = step_sum + zeta * tree_step
                stage_sum = stage_sum + zeta * tree_stage
            step.append(step_sum)
            stage.append(stage_sum)
        return LteSeries(tableau=tableau.name, problem=problem.name, t0=t0, Z=expansion.Z, step=step, stage=stage)

    def lte_coeffs_direct(
        self, tableau: ButcherTableau, problem: SemilinearProblem, t0: float, Z: np.ndarray, max_order: int
    ) -> LteSeries:
        """Same coefficients through the stage-error recursion."""
        self._check_order(problem, max_order)
        expansion = _Expansion(tableau, problem, t0, Z)
        step, stage = expansion.direct(max_order)
        return LteSeries(tableau=tableau.name, problem=problem.name, t0=t0, Z=expansion.Z, step=step, stage=stage)

    def order3_closed_form(
        self, tableau: ButcherTableau, problem: SemilinearProblem, t0: float, Z: np.ndarray
    ) -> list[np.ndarray]:
        """Coefficients of h, h^2 and h^3 written out term by term."""
        e = _Expansion(tableau, problem, t0, Z)
        b, Zm = e.b, e.Z
        y1, y2, y3 = e.derivative(1), e.derivative(2), e.derivative(3)
        q1, q2, q3 = (e.defect(i).q_hat for i in (1, 2, 3))
        stage2 = e.solve(e.source(2))
        stage3 = e.solve(e.source(3))
        jacobian = e.problem.jacobian_g(e.y)
        return [
            q1 * y1,
            q2 * y2 + Zm @ (b @ stage2),
            q3 * y3 + Zm @ (b @ stage3) + b @ e.solve(stage2 @ jacobian.T),
        ]

    def abstract_recursion_values(
        self, dimension: int = 3, seed: int = 0, max_order: int = MAX_SERIES_ORDER, zero_maps: bool = False
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """v_1..v_max_order of the abstract recursion, computed directly and as a tree sum.

        Uses random vectors a_i, random symmetric k-linear maps W_{ell,k} (k <= 3, ell <= 2) and random
        weights lambda_{ell,k}; missing (ell, k) pairs act as zero maps.
        """
        if not 1 <= dimension <= 4:
            raise ValueError(f"dimension must be in [1, 4], got {dimension}")
        rng = np.random.default_rng(seed)
        a = {i: rng.standard_normal(dimension) for i in range(1, max_order)}
        maps: dict[tuple[int, int], np.ndarray] = {}
        weights: dict[tuple[int, int], float] = {}
        for ell in range(3):
            for k in range(1, 4):
                tensor = _symmetrize(rng.standard_normal((dimension,) * (k + 1)))
                maps[(ell, k)] = np.zeros_like(tensor) if zero_maps else tensor
                weights[(ell, k)] = float(rng.uniform(-1.0, 1.0))

        def W(ell: int, k: int, vectors: Sequence[np.ndarray]) -> np.ndarray:
            tensor = maps.get((ell, k))
            return np.zeros(dimension) if tensor is None else _apply(tensor, vectors)

        direct = {1: np.zeros(dimension)}
        for i in range(1, max_order):
            total = a[i].copy()
            for ell in range(i):
                for k in range(1, i - ell + 1):
                    lam = weights.get((ell, k), 0.0)
                    for m in _compositions(i - ell, k):
                        total += lam * W(ell, k, [direct[index] for index in m])
            direct[i + 1] = total

        phi_cache: dict[RootedTree, np.ndarray] = {}

        def phi(tree: RootedTree) -> np.ndarray:
            if tree not in phi_cache:
                if tree.is_leaf:
                    value = np.zeros(dimension)
                elif tree.is_bushy:
                    value = a[tree.ell]
                else:
                    value = W(tree.ell, tree.k, [phi(child) for child in tree.children])
                phi_cache[tree] = value
            return phi_cache[tree]

        def zeta(tree: RootedTree) -> Any:
            return self.tree_service.combinatorial_factor(tree, lambda ell, k: weights.get((ell, k), 0.0))

        tree_sum = [
            sum((float(zeta(tree)) * phi(tree) for tree in self.tree_service.enumerate_trees(i)), np.zeros(dimension))
            for i in range(1, max_order + 1)
        ]
        return [direct[i] for i in range(1, max_order + 1)], tree_sum

    def abstract_recursion_check(
        self, dimension: int = 3, seed: int = 0, max_order: int = MAX_SERIES_ORDER, tol: float = AGREEMENT_TOLERANCE
    ) -> bool:
        """Direct recursion and tree sum agree to ``tol`` relative."""
        direct, tree_sum = self.abstract_recursion_values(dimension, seed, max_order)
        worst = 0.0
        for u, v in zip(direct, tree_sum):
            scale = max(float(np.linalg.norm(u)), float(np.linalg.norm(v)), np.finfo(float).tiny)
            worst = max(worst, float(np.linalg.norm(u - v)) / scale)
        logger.debug("Abstract recursion check", dimension=dimension, seed=seed, max_relative_difference=worst)
        return worst <= tol

    def one_step_remainder_probe(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        t0: float,
        hs: Sequence[float],
        order: int,
        cfg: Optional[NewtonConfig] = None,
    ) -> RemainderProbe:
        """Fit ||y(t0 + h) - y_1 - sum_{i <= order} h^i delta y^(i)(Z = hJ)|| against h."""
        remainders = []
        for h in hs:
            error = self.solver_service.one_step_error(tableau, problem, t0, h, cfg)
            if order > 0:
                series = self.lte_coeffs_direct(tableau, problem, t0, h * problem.J, order)
                error = error - series.truncated(h, order)
            remainders.append(float(np.linalg.norm(error)))
        fit = estimate_order(remainders, hs, float(np.linalg.norm(problem.exact(t0))))
        logger.debug(
            "Remainder probe", tableau=tableau.name, problem=problem.name, order=order, slope=fit.slope
        )
        return RemainderProbe(
            order=order,
            hs=list(hs),
            remainders=remainders,
            slope=fit.slope,
            fit_residual=fit.fit_residual,
            constant=fit.constant,
        )

    @staticmethod
    def vanishing_through(series: LteSeries, derivative_scale: float, tol: float = VANISH_TOLERANCE) -> int:
        """Largest i such that every step coefficient up to h^i is zero to ``tol`` (relative)."""
        through = 0
        for coefficient in series.step:
            if float(np.linalg.norm(coefficient)) > tol * max(1.0, derivative_scale):
                break
            through += 1
        return through

    def verify(
        self,
        tableau: ButcherTableau,
        problem_name: str,
        lambdas: Sequence[float] = (-1.0, -1e3, -1e6),
        h: float = 1e-2,
        max_order: int = 4,
        t0: float = 0.5,
        tol: float = ANALYSIS_DEFAULTS.tol,
        remainder_hs: Optional[Sequence[float]] = None,
    ) -> LteVerification:
        """Cross-check the two expansions, the closed form and the abstract recursion for each lambda."""
        p_sl = self.condition_service.semilinear_order(tableau, ANALYSIS_DEFAULTS.max_order, tol).p_sl
        checks = []
        problem: Optional[SemilinearProblem] = None
        for lam in lambdas:
            problem = self.problem_service.builtin_problem(problem_name, lam)
            Z = h * problem.J
            tree_series = self.lte_series_tree(tableau, problem, t0, Z, max_order)
            direct = self.lte_coeffs_direct(tableau, problem, t0, Z, max_order)
            closed = self.order3_closed_form(tableau, problem, t0, Z)
            closed_series = tree_series.model_copy(update={"step": closed, "stage": []})
            head = tree_series.model_copy(update={"step": tree_series.step[:3], "stage": []})
            difference = tree_series.max_relative_difference(direct)
            closed_difference = head.max_relative_difference(closed_series)
            scale = max(float(np.linalg.norm(problem.exact(t0, i))) for i in range(1, max_order + 1))
            checks.append(
                LteCheck(
                    stiffness=lam,
                    h=h,
                    tree_vs_direct=difference,
                    closed_form_difference=closed_difference,
                    vanishing_through=self.vanishing_through(tree_series, scale),
                    agrees=difference <= AGREEMENT_TOLERANCE and closed_difference <= AGREEMENT_TOLERANCE,
                )
            )
        abstract_ok = all(self.abstract_recursion_check(3, seed) for seed in range(10))
        remainder = None
        if remainder_hs is not None and problem is not None:
            remainder = self.one_step_remainder_probe(tableau, problem, t0, remainder_hs, min(p_sl, max_order))
        result = LteVerification(
            tableau=tableau.name,
            problem=problem_name,
            max_order=max_order,
            p_sl=p_sl,
            checks=checks,
            abstract_recursion_ok=abstract_ok,
            remainder=remainder,
        )
        log = logger.bind(tableau=tableau.name, problem=problem_name)
        if result.ok:
            log.success("Error expansions agree", p_sl=p_sl)
        else:
            log.warning("Error expansions disagree", checks=[check.model_dump() for check in checks])
        return result
