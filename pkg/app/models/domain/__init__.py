"""Core value objects of the analysis."""

from app.models.domain.problem import ProblemInstance, SemilinearProblem, SolutionTerm, log_norm
from app.models.domain.rational_function import RationalFunction
from app.models.domain.tableau import ButcherTableau, DefectPair
from app.models.domain.tree import TAU0, RootedTree
from app.models.domain.tree_space import TreeSpaceBasis

__all__ = [
    "ButcherTableau",
    "DefectPair",
    "RootedTree",
    "TAU0",
    "TreeSpaceBasis",
    "RationalFunction",
    "SemilinearProblem",
    "SolutionTerm",
    "ProblemInstance",
    "log_norm",
]
