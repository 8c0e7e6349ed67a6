from enum import StrEnum


class ScalarMode(StrEnum):
    """Arithmetic mode of a tableau"""

    RATIONAL = "rational"
    FLOAT = "float"


class MethodStructure(StrEnum):
    """Sparsity class of the Butcher matrix"""

    EXPLICIT = "explicit"
    DIRK = "DIRK"
    FULLY_IMPLICIT = "fully-implicit"


class Verdict(StrEnum):
    """Tri-state outcome of a sampled stability check"""

    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


class ProblemName(StrEnum):
    """Builtin semilinear test problems"""

    NPR_SCALAR = "npr-scalar"
    NPR_2D = "npr-2d"
    MOL_REACTION_DIFFUSION = "mol-reaction-diffusion"


class JacobianMode(StrEnum):
    """How the Newton iteration obtains g'"""

    ANALYTIC = "analytic-g'"
    FINITE_DIFFERENCE = "finite-difference"


class ConvergenceBranch(StrEnum):
    """Case of the global error estimate that applies"""

    SUPERCONVERGENCE = "superconvergence"
    BASE = "base"
    NO_GUARANTEE = "no-guarantee"


class OutputFormat(StrEnum):
    """Report formats of the command-line tool"""

    TABLE = "table"
    CSV = "csv"
    JSON = "json"
