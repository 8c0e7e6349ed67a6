"""Semilinear order conditions built from the V_tau spaces."""

from itertools import product
from typing import Any, Callable, Optional

from loguru import logger

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import SingleVertexTreeError, TreeOrderOutOfRangeError, UnknownTable1LabelError
from app.models.domain.tableau import ButcherTableau
from app.models.domain.tree import RootedTree
from app.models.domain.tree_space import TreeSpaceBasis
from app.models.schemas.order import OrderReport, TreeCondition
from app.services.arithmetic import Algebra, algebra_for, krylov_basis
from app.services.tableau_service import TableauService
from app.services.tree_service import TreeService

MAX_CHECKED_ORDER = 6

# Label of each printed table row -> tree. Row 5h is not evaluated (its printed formula repeats 5g).
TABLE1_TREES: dict[str, str] = {
    "1a": "[]",
    "2a": "[[]]",
    "3a": "[[][]]",
    "3b": "[[[]]]",
    "4a": "[[][][]]",
    "4b": "[[[]][]]",
    "4c": "[[[][]]]",
    "4d": "[[[[]]]]",
    "5a": "[[][][][]]",
    "5b": "[[[]][][]]",
    "5c": "[[[]][[]]]",
    "5d": "[[[][]][]]",
    "5e": "[[[[]]][]]",
    "5f": "[[[][][]]]",
    "5g": "[[[[]][]]]",
    "5i": "[[[[[]]]]]",
}


class _SpaceCache:
    """V_tau bases for one tableau, keyed by tree encoding."""

    def __init__(self, algebra: Algebra, tableau_service: TableauService) -> None:
        self.algebra = algebra
        self.tableau_service = tableau_service
        self.spaces: dict[str, tuple[list[Any], int]] = {}

    def s_hat(self, ell: int) -> Any:
        return self.tableau_service.defect_pair_in(self.algebra, ell).s_hat

    def generators(self, tree: RootedTree) -> list[Any]:
        """C^ell (beta_1 x ... x beta_k) over every combination of child basis vectors."""
        weight = self.algebra.c_power(tree.ell)
        child_bases = [self.space(child)[0] for child in tree.children]
        result = []
        for combination in product(*child_bases):
            vector = weight
            for beta in combination:
                vector = self.algebra.hadamard(vector, beta)
            result.append(vector)
        return result

    def space(self, tree: RootedTree) -> tuple[list[Any], int]:
        if tree.is_leaf:
            raise SingleVertexTreeError("v_space")
        key = tree.encoding
        if key not in self.spaces:
            if tree.is_bushy:
                self.spaces[key] = krylov_basis(self.algebra, [self.s_hat(tree.ell + 1)], start_power=0)
            else:
                self.spaces[key] = krylov_basis(self.algebra, self.generators(tree), start_power=1)
        return self.spaces[key]

    def residuals(self, tree: RootedTree) -> list[Any]:
        algebra = self.algebra
        if tree.is_bushy:
            q_hat = self.tableau_service.defect_pair_in(algebra, tree.ell + 1).q_hat
            if tree.is_leaf:
                return [q_hat]
            basis, _ = self.space(tree)
            return [q_hat] + [algebra.dot_b(beta) for beta in basis]
        condition_space, _ = krylov_basis(algebra, self.generators(tree), start_power=0)
        return [algebra.dot_b(u) for u in condition_space]


class ConditionService:
    """V_tau spaces, semilinear order, weak stage order and the printed condition table."""

    def __init__(self, tableau_service: Optional[TableauService] = None, tree_service: Optional[TreeService] = None):
        """Initialize service."""
        self.tree_service = tree_service or TreeService()
        self.tableau_service = tableau_service or TableauService(self.tree_service)

    def _cache(self, tableau: ButcherTableau, tol: float) -> _SpaceCache:
        return _SpaceCache(algebra_for(tableau, tol), self.tableau_service)

    def v_space(
        self,
        tableau: ButcherTableau,
        tree: RootedTree,
        rank_tol: float = ANALYSIS_DEFAULTS.tol,
    ) -> TreeSpaceBasis:
        """Basis of V_tau; the single-vertex tree has no space."""
        basis, tried = self._cache(tableau, rank_tol).space(tree)
        return TreeSpaceBasis(tree=tree, basis=tuple(basis), mode=tableau.mode, generators_tried=tried)

    def condition_residuals(
        self,
        tableau: ButcherTableau,
        tree: RootedTree,
        tol: float = ANALYSIS_DEFAULTS.tol,
    ) -> list[Any]:
        """Residuals whose simultaneous vanishing is the condition of ``tree``."""
        return self._cache(tableau, tol).residuals(tree)

    def is_satisfied(self, tableau: ButcherTableau, residuals: list[Any], tol: float) -> bool:
        algebra = algebra_for(tableau, tol)
        return all(algebra.is_zero(r) for r in residuals)

    def semilinear_order(
        self,
        tableau: ButcherTableau,
        max_order: int = ANALYSIS_DEFAULTS.max_order,
        tol: float = ANALYSIS_DEFAULTS.tol,
        use_reduction: bool = True,
    ) -> OrderReport:
        """p_SL over trees of order 1..max_order, skipping redundant trees when ``use_reduction``."""
        if not 1 <= max_order <= MAX_CHECKED_ORDER:
            raise TreeOrderOutOfRangeError(max_order, 1, MAX_CHECKED_ORDER)
        cache = self._cache(tableau, tol)
        algebra = cache.algebra
        rows: list[TreeCondition] = []
        for tree in self.tree_service.trees_up_to(max_order):
            tree_logger = logger.bind(tableau=tableau.name, tree=tree.encoding)
            if use_reduction and not self.tree_service.is_semi_lone_child_avoiding(tree):
                rows.append(TreeCondition(tree=tree.encoding, order=tree.order, skipped=True))
                continue
            residuals = cache.residuals(tree)
            magnitudes = [algebra.magnitude(r) for r in residuals]
            satisfied = all(algebra.is_zero(r) for r in residuals)
            tree_logger.debug("Checked tree conditions", satisfied=satisfied, residuals=len(residuals))
            rows.append(
                TreeCondition(
                    tree=tree.encoding,
                    order=tree.order,
                    satisfied=satisfied,
                    max_residual=max(magnitudes, default=0.0),
                    residual_count=len(residuals),
                )
            )

        p_sl = 0
        for order in range(1, max_order + 1):
            if any(row.satisfied is False for row in rows if row.order == order):
                break
            p_sl = order
        logger.info(
            "Semilinear order computed",
            tableau=tableau.name,
            p_sl=p_sl,
            max_order=max_order,
            reduction=use_reduction,
        )
        return OrderReport(
            tableau=tableau.name,
            mode=tableau.mode,
            p_sl=p_sl,
            max_order=max_order,
            tol=tol,
            reduction_used=use_reduction,
            trees=rows,
        )

    def weak_stage_order(
        self,
        tableau: ButcherTableau,
        tol: float = ANALYSIS_DEFAULTS.tol,
        cap: int = ANALYSIS_DEFAULTS.stage_order_cap,
    ) -> int:
        """Largest m with b^T c^l = 1/(l+1) and b^T A^i (c^(l+1)/(l+1) - A c^l) = 0, l < m, i < s."""
        algebra = algebra_for(tableau, tol)
        m = 0
        while m < cap:
            ell = m
            if not algebra.is_zero(algebra.dot_b(algebra.c_power(ell)) - algebra.fraction(1, ell + 1)):
                break
            vector = algebra.subtract(
                algebra.scale(algebra.fraction(1, ell + 1), algebra.c_power(ell + 1)),
                algebra.matvec(algebra.c_power(ell)),
            )
            holds = True
            for _ in range(algebra.s):
                if not algebra.is_zero(algebra.dot_b(vector)):
                    holds = False
                    break
                vector = algebra.matvec(vector)
            if not holds:
                break
            m += 1
        return m

    def table1_residuals(self, tableau: ButcherTableau, label: str, tol: float = ANALYSIS_DEFAULTS.tol) -> list[Any]:
        """Evaluate a printed table row over all index tuples in {0..s-1}."""
        if label not in TABLE1_TREES:
            raise UnknownTable1LabelError(label, list(TABLE1_TREES))
        algebra = algebra_for(tableau, tol)
        formula = _table1_formulas(algebra)[label]
        scalars, index_count, term = formula
        residuals = list(scalars)
        if index_count:
            residuals.extend(term(*indices) for indices in product(range(algebra.s), repeat=index_count))
        return residuals

    def table1_tree(self, label: str) -> RootedTree:
        if label not in TABLE1_TREES:
            raise UnknownTable1LabelError(label, list(TABLE1_TREES))
        return self.tree_service.parse(TABLE1_TREES[label])


def _table1_formulas(alg: Algebra) -> dict[str, tuple[list[Any], int, Callable[..., Any]]]:
    """label -> (scalar residuals, number of indices, residual of one index tuple)."""
    b, c = alg.dot_b, alg.c_power

    def power(v: Any, n: int) -> Any:
        for _ in range(n):
            v = alg.matvec(v)
        return v

    def C(v: Any, n: int = 1) -> Any:
        return alg.hadamard(c(n), v)

    def shat(ell: int) -> Any:
        return alg.subtract(
            alg.scale(alg.fraction(1, int(alg.factorial(ell))), c(ell)),
            alg.scale(alg.fraction(1, int(alg.factorial(ell - 1))), alg.matvec(c(ell - 1))),
        )

    s2, s3, s4, s5 = shat(2), shat(3), shat(4), shat(5)
    one = alg.fraction(1, 1)

    return {
        "1a": ([one - b(alg.ones())], 0, lambda: one),
        "2a": ([alg.fraction(1, 2) - b(c(1))], 1, lambda i1: b(power(s2, i1))),
        "3a": ([alg.fraction(1, 6) - b(c(2)) * alg.fraction(1, 2)], 1, lambda i1: b(power(s3, i1))),
        "3b": ([], 2, lambda i1, i2: b(power(s2, i1 + i2))),
        "4a": ([alg.fraction(1, 24) - b(c(3)) * alg.fraction(1, 6)], 1, lambda i1: b(power(s4, i1))),
        "4b": ([], 2, lambda i1, i2: b(power(C(power(s2, i2)), i1))),
        "4c": ([], 2, lambda i1, i2: b(power(s3, i1 + i2))),
        "4d": ([], 3, lambda i1, i2, i3: b(power(s2, i1 + i2 + i3 + 1))),
        "5a": ([alg.fraction(1, 120) - b(c(4)) * alg.fraction(1, 24)], 1, lambda i1: b(power(s5, i1))),
        "5b": ([], 2, lambda i1, i2: b(power(C(power(s2, i2), 2), i1))),
        "5c": ([], 3, lambda i1, i2, i3: b(power(alg.hadamard(power(s2, i2), power(s2, i3)), i1))),
        "5d": ([], 2, lambda i1, i2: b(power(C(power(s3, i2)), i1))),
        "5e": ([], 3, lambda i1, i2, i3: b(power(C(power(s2, i2 + i3 + 1)), i1))),
        "5f": ([], 2, lambda i1, i2: b(power(s4, i1 + i2))),
        "5g": ([], 3, lambda i1, i2, i3: b(power(C(power(s2, i3)), i1 + i2 + 1))),
        "5i": ([], 4, lambda i1, i2, i3, i4: b(power(s2, i1 + i2 + i3 + i4 + 2))),
    }
