"""Tableau service module."""

from typing import Any

from loguru import logger

from app.config import ANALYSIS_DEFAULTS
from app.models.domain.tableau import ButcherTableau, DefectPair
from app.models.domain.tree import RootedTree
from app.services.arithmetic import Algebra, algebra_for
from app.services.tree_service import TreeService


class TableauService:
    """Simplifying-assumption defects, stage order and classical order of a tableau."""

    def __init__(self, tree_service: TreeService | None = None) -> None:
        """Initialize service."""
        self.tree_service = tree_service or TreeService()

    @staticmethod
    def defect_pair_in(algebra: Algebra, ell: int) -> DefectPair:
        if ell < 1:
            raise ValueError(f"defect index must be positive, got {ell}")
        inv_fact = 1 / algebra.factorial(ell)
        inv_prev = 1 / algebra.factorial(ell - 1)
        previous = algebra.c_power(ell - 1)
        q_hat = inv_fact - algebra.dot_b(previous) * inv_prev
        s_hat = algebra.subtract(
            algebra.scale(inv_fact, algebra.c_power(ell)),
            algebra.scale(inv_prev, algebra.matvec(previous)),
        )
        return DefectPair(ell=ell, q_hat=q_hat, s_hat=s_hat)

    def defect_pair(self, tableau: ButcherTableau, ell: int, tol: float = ANALYSIS_DEFAULTS.tol) -> DefectPair:
        """q_hat_ell and s_hat_ell, exact for rational tableaux."""
        return self.defect_pair_in(algebra_for(tableau, tol), ell)

    def stage_order(
        self,
        tableau: ButcherTableau,
        tol: float = ANALYSIS_DEFAULTS.tol,
        cap: int = ANALYSIS_DEFAULTS.stage_order_cap,
    ) -> int:
        """Largest q with B(k) and C(k) holding for k = 1..q, at most ``cap``."""
        algebra = algebra_for(tableau, tol)
        q = 0
        while q < cap:
            pair = self.defect_pair_in(algebra, q + 1)
            if not algebra.is_zero(pair.q_hat) or not all(algebra.is_zero(x) for x in pair.s_hat):
                break
            q += 1
        if q == cap:
            logger.warning("Stage order probe saturated", tableau=tableau.name, cap=cap)
        return q

    def elementary_weight(self, algebra: Algebra, tree: RootedTree) -> Any:
        """Phi(tau) = c^ell x prod_i A Phi(tau_i) (elementwise product)."""
        weight = algebra.c_power(tree.ell)
        for child in tree.children:
            weight = algebra.hadamard(weight, algebra.matvec(self.elementary_weight(algebra, child)))
        return weight

    def classical_residual(self, algebra: Algebra, tree: RootedTree) -> Any:
        """b^T Phi(tau) - 1/gamma(tau)."""
        gamma = self.tree_service.density(tree)
        return algebra.dot_b(self.elementary_weight(algebra, tree)) - algebra.fraction(1, gamma)

    def classical_order(
        self,
        tableau: ButcherTableau,
        tol: float = ANALYSIS_DEFAULTS.tol,
        cap: int = ANALYSIS_DEFAULTS.classical_order_cap,
    ) -> int:
        """Largest p <= cap with every classical rooted-tree condition through order p."""
        algebra = algebra_for(tableau, tol)
        p = 0
        for order in range(1, cap + 1):
            failed = [
                tree.encoding
                for tree in self.tree_service.enumerate_trees(order)
                if not algebra.is_zero(self.classical_residual(algebra, tree))
            ]
            if failed:
                logger.debug("Classical conditions fail", tableau=tableau.name, order=order, trees=failed)
                break
            p = order
        return p
