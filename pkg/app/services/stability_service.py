"""Stability service module."""

from typing import Callable, Optional

import numpy as np
import scipy.linalg
import sympy as sp
from loguru import logger
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from app.config import ANALYSIS_DEFAULTS, AnalysisDefaults
from app.exceptions import SingularStageMatrixError
from app.models.domain.problem import log_norm
from app.models.domain.rational_function import RationalFunction
from app.models.domain.tableau import ButcherTableau
from app.models.enums import MethodStructure, ScalarMode, Verdict
from app.models.schemas.stability import CheckResult, NevanlinnaProbe, StabilityReport, Witness

EXACT_DET_MAX_STAGES = 8
FAR_RADII = (1e8, 1e12)
GROWTH_RADII = (1e5, 1e8)
GROWTH_FACTOR = 10.0
REAL_AXIS_STEP = 0.5
REAL_AXIS_POINTS = 2000

BoundaryFunction = Callable[[np.ndarray], np.ndarray]


def _stacked_resolvent(A: np.ndarray, z: np.ndarray) -> np.ndarray:
    """(I - z A)^-1 for every z; singular points give inf entries."""
    s = A.shape[0]
    matrices = np.eye(s)[None, :, :] - z[:, None, None] * A[None, :, :]
    try:
        return np.linalg.inv(matrices)
    except np.linalg.LinAlgError:
        out = np.full(matrices.shape, np.inf, dtype=complex)
        for n, matrix in enumerate(matrices):
            try:
                out[n] = np.linalg.inv(matrix)
            except np.linalg.LinAlgError:
                continue
        return out


class StabilityService:
    """Stability function, A/AS/ASI stability, the R-condition and the Nevanlinna probe."""

    def __init__(self, defaults: AnalysisDefaults = ANALYSIS_DEFAULTS) -> None:
        """Initialize service."""
        self.defaults = defaults

    def stability_function(self, tableau: ButcherTableau) -> RationalFunction:
        """R(z) = det(I - zA + z 1 b^T) / det(I - zA)."""
        s = tableau.s
        if tableau.is_rational and s <= EXACT_DET_MAX_STAGES:
            z = sp.Symbol("z")
            shifted = sp.eye(s) - z * sp.Matrix(tableau.A)
            denominator = sp.Poly(shifted.det(method="bareiss"), z)
            numerator = sp.Poly((shifted + z * sp.ones(s, 1) * tableau.b.T).det(method="bareiss"), z)
            return RationalFunction(
                numerator=tuple(reversed(numerator.all_coeffs())),
                denominator=tuple(reversed(denominator.all_coeffs())),
                mode=ScalarMode.RATIONAL,
            )
        if tableau.is_rational:
            logger.warning("Exact determinant skipped, using eigenvalues", tableau=tableau.name, stages=s)
        A = tableau.A_float
        # det(I - zM) in ascending powers of z equals the characteristic polynomial of M in descending powers.
        denominator = np.real(np.poly(np.linalg.eigvals(A)))
        numerator = np.real(np.poly(np.linalg.eigvals(A - np.outer(np.ones(s), tableau.b_float))))
        return RationalFunction(
            numerator=tuple(float(x) for x in numerator),
            denominator=tuple(float(x) for x in denominator),
            mode=ScalarMode.FLOAT,
        )

    def boundary_points(self, samples: Optional[int] = None) -> np.ndarray:
        """Imaginary axis as the Moebius image z = (w - 1)/(w + 1) of the unit circle, plus z = 0."""
        n = samples or self.defaults.boundary_samples
        theta = -np.pi + (np.arange(n) + 0.5) * (2.0 * np.pi / n)
        return np.concatenate([[0j], 1j * np.tan(theta / 2.0)])

    @staticmethod
    def far_points() -> np.ndarray:
        """Points standing in for z = infinity along the boundary and the negative real axis."""
        return np.array([r * d for r in FAR_RADII for d in (1j, -1j, -1.0)], dtype=complex)

    def boundary_sup(self, f: BoundaryFunction, samples: Optional[int] = None) -> tuple[float, complex]:
        """Sampled supremum of ``f`` over the imaginary axis and infinity, refined around the argmax."""
        n = samples or self.defaults.boundary_samples
        points = np.concatenate([self.boundary_points(n), self.far_points()])
        with np.errstate(all="ignore"):
            values = np.nan_to_num(f(points), nan=np.inf, posinf=np.inf)
        best = int(np.argmax(values))
        sup, where = float(values[best]), complex(points[best])
        if 0 < best <= n and np.isfinite(sup):
            step = 2.0 * np.pi / n
            theta = -np.pi + (best - 0.5) * step

            def negative(t: float) -> float:
                with np.errstate(all="ignore"):
                    return -float(f(np.array([1j * np.tan(t / 2.0)]))[0])

            low, high = max(theta - step, -np.pi + 1e-12), min(theta + step, np.pi - 1e-12)
            refined = minimize_scalar(negative, bounds=(low, high), method="bounded", options={"xatol": 1e-12})
            if refined.success and -refined.fun > sup:
                sup, where = float(-refined.fun), complex(1j * np.tan(refined.x / 2.0))
        return sup, where

    def resolvent_norms(self, A: np.ndarray, z: np.ndarray) -> np.ndarray:
        """||(I - zA)^-1||_2 for every z."""
        inverse = _stacked_resolvent(A, z)
        if not np.all(np.isfinite(inverse)):
            norms = np.full(len(z), np.inf)
            finite = np.all(np.isfinite(inverse), axis=(1, 2))
            norms[finite] = np.linalg.norm(inverse[finite], ord=2, axis=(1, 2))
            return norms
        return np.linalg.norm(inverse, ord=2, axis=(1, 2))

    def as_norms(self, A: np.ndarray, b: np.ndarray, z: np.ndarray) -> np.ndarray:
        """||z b^T (I - zA)^-1||_2 for every z."""
        inverse = _stacked_resolvent(A, z)
        with np.errstate(all="ignore"):
            rows = np.einsum("j,njk->nk", b, inverse)
            norms = np.abs(z) * np.linalg.norm(rows, axis=1)
        return np.nan_to_num(norms, nan=np.inf, posinf=np.inf)

    def _pole_check(self, roots: np.ndarray, label: str) -> Optional[CheckResult]:
        """Fails on a root in the open left half-plane, inconclusive within the guard band of the axis."""
        guard = self.defaults.axis_guard
        for root in sorted(roots, key=lambda r: r.real):
            if root.real < -guard:
                return CheckResult(verdict=Verdict.FAILS, witness=Witness.at(root, None, f"{label} in the left half-plane"))
        for root in roots:
            if abs(root.real) <= guard:
                return CheckResult(verdict=Verdict.INCONCLUSIVE, witness=Witness.at(root, None, f"{label} near the axis"))
        return None

    def _classify(self, sup: float, where: complex, f: BoundaryFunction, bound: float) -> CheckResult:
        if sup > bound + self.defaults.inconclusive_slack:
            witness = self._real_axis_witness(f, bound) or Witness.at(where, sup, "boundary maximum")
            return CheckResult(verdict=Verdict.FAILS, sup_estimate=sup, witness=witness)
        if sup > bound + self.defaults.verdict_slack:
            return CheckResult(verdict=Verdict.INCONCLUSIVE, sup_estimate=sup, witness=Witness.at(where, sup))
        return CheckResult(verdict=Verdict.HOLDS, sup_estimate=sup)

    def _real_axis_witness(self, f: BoundaryFunction, bound: float) -> Optional[Witness]:
        """First violating point of the grid z = -0.5, -1.0, ... on the negative real axis."""
        z = -REAL_AXIS_STEP * np.arange(1, REAL_AXIS_POINTS + 1).astype(complex)
        with np.errstate(all="ignore"):
            values = f(z)
        violating = np.flatnonzero(values > bound + self.defaults.inconclusive_slack)
        if violating.size == 0:
            return None
        first = int(violating[0])
        return Witness.at(z[first], float(values[first]), "negative real axis")

    def check_A_stability(self, tableau: ButcherTableau, R: Optional[RationalFunction] = None) -> CheckResult:
        """|R(z)| <= 1 on the closed left half-plane: no poles there and a bounded boundary maximum."""
        R = R or self.stability_function(tableau)

        def modulus(z: np.ndarray) -> np.ndarray:
            return np.abs(R(z))

        if R.degrees[1] > 0:
            poles = self._pole_check(P.polyroots(R.denominator_float), "pole of R")
            if poles is not None:
                return poles
        at_infinity = R.value_at_infinity()
        if at_infinity == "infinite":
            witness = self._real_axis_witness(modulus, 1.0) or Witness(at_infinity=True, note="R unbounded")
            return CheckResult(verdict=Verdict.FAILS, witness=witness)
        sup, where = self.boundary_sup(modulus)
        return self._classify(sup, where, modulus, 1.0)

    def _growth_witness(self, f: BoundaryFunction) -> Optional[Witness]:
        """Detect growth of ``f`` as z -> infinity along rays of the left half-plane."""
        angles = np.linspace(np.pi / 2, 3 * np.pi / 2, 9)
        directions = np.exp(1j * angles)
        near, far = (f(r * directions) for r in GROWTH_RADII)
        with np.errstate(all="ignore"):
            ratio = far / np.maximum(near, 1.0)
        worst = int(np.argmax(np.nan_to_num(ratio, nan=np.inf, posinf=np.inf)))
        if not ratio[worst] <= GROWTH_FACTOR:
            return Witness.at(GROWTH_RADII[1] * directions[worst], float(far[worst]), "grows as |z| -> infinity")
        return None

    def _bounded_check(self, tableau: ButcherTableau, f: BoundaryFunction) -> CheckResult:
        A = tableau.A_float
        eigenvalues = np.linalg.eigvals(A)
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        nonzero = eigenvalues[np.abs(eigenvalues) > 1e-12 * scale]
        poles = self._pole_check(1.0 / nonzero, "pole of (I - zA)^-1") if nonzero.size else None
        if poles is not None:
            return poles
        growth = self._growth_witness(f)
        if growth is not None:
            return CheckResult(verdict=Verdict.FAILS, witness=growth)
        sup, _ = self.boundary_sup(f)
        if not np.isfinite(sup):
            return CheckResult(verdict=Verdict.INCONCLUSIVE, witness=Witness(note="unbounded sample"))
        return CheckResult(verdict=Verdict.HOLDS, sup_estimate=sup)

    def check_ASI_stability(self, tableau: ButcherTableau) -> CheckResult:
        """(I - zA)^-1 uniformly bounded on the closed left half-plane."""
        A = tableau.A_float
        return self._bounded_check(tableau, lambda z: self.resolvent_norms(A, z))

    def check_AS_stability(self, tableau: ButcherTableau) -> CheckResult:
        """z b^T (I - zA)^-1 uniformly bounded on the closed left half-plane."""
        A, b = tableau.A_float, tableau.b_float
        return self._bounded_check(tableau, lambda z: self.as_norms(A, b, z))

    def check_R_condition(self, tableau: ButcherTableau, R: Optional[RationalFunction] = None) -> CheckResult:
        """R(infinity) != 1 and (1 - R(z))/z has no zeros in the closed left half-plane."""
        R = R or self.stability_function(tableau)
        if R.mode == ScalarMode.RATIONAL:
            at_infinity = R.exact_value_at_infinity()
            is_one = at_infinity == 1
            at_infinity_value = None if at_infinity == sp.oo else float(at_infinity)
        else:
            value = R.value_at_infinity()
            at_infinity_value = None if value == "infinite" else float(value)
            is_one = at_infinity_value is not None and abs(at_infinity_value - 1.0) <= self.defaults.tol
        if is_one:
            return CheckResult(
                verdict=Verdict.FAILS,
                witness=Witness(at_infinity=True, value=at_infinity_value, note="R(infinity) = 1"),
            )

        zeros = self._quotient_zeros(R)
        if zeros is None:
            return CheckResult(verdict=Verdict.FAILS, witness=Witness.at(0j, 1.0, "R is identically 1"))
        failure = self._pole_check(zeros, "zero of (1 - R(z))/z")
        return failure or CheckResult(verdict=Verdict.HOLDS)

    @staticmethod
    def _quotient_zeros(R: RationalFunction) -> Optional[np.ndarray]:
        """Zeros of (1 - R(z))/z after cancelling z and any factor shared with the denominator."""
        if R.mode == ScalarMode.RATIONAL:
            z = sp.Symbol("z")
            numerator = sum(c * z**i for i, c in enumerate(R.numerator))
            denominator = sum(c * z**i for i, c in enumerate(R.denominator))
            top, _ = sp.fraction(sp.cancel((denominator - numerator) / (z * denominator)))
            if top == 0:
                return None
            coefficients = [float(c) for c in reversed(sp.Poly(top, z).all_coeffs())]
            return P.polyroots(coefficients) if len(coefficients) > 1 else np.array([], dtype=complex)

        size = max(len(R.numerator), len(R.denominator))
        difference = np.zeros(size)
        difference[: len(R.denominator)] += R.denominator_float
        difference[: len(R.numerator)] -= R.numerator_float
        quotient = difference[1:]
        scale = max(float(np.max(np.abs(difference))), 1.0)
        nonzero = np.flatnonzero(np.abs(quotient) > 1e-14 * scale)
        if nonzero.size == 0:
            return None
        quotient = quotient[: nonzero[-1] + 1]
        if len(quotient) == 1:
            return np.array([], dtype=complex)
        roots = P.polyroots(quotient)
        shared = np.abs(P.polyval(roots, R.denominator_float)) <= 1e-9 * max(1.0, float(np.max(np.abs(R.denominator_float))))
        return roots[~shared]

    @staticmethod
    def log_norm(matrix: np.ndarray) -> float:
        """Largest eigenvalue of the symmetric part (Euclidean inner product)."""
        return log_norm(matrix)

    def resolvent_sup(self, tableau: ButcherTableau) -> float:
        A = tableau.A_float
        sup, _ = self.boundary_sup(lambda z: self.resolvent_norms(A, z))
        return sup

    def nevanlinna_probe(self, tableau: ButcherTableau, Z: np.ndarray) -> NevanlinnaProbe:
        """Compare ||(I - A (x) Z)^-1|| with the sampled boundary supremum of ||(I - zA)^-1||."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        mu = log_norm(Z)
        if mu > self.defaults.nevanlinna_slack:
            logger.warning("Probe matrix is not dissipative", tableau=tableau.name, log_norm=mu)
        system = np.eye(tableau.s * Z.shape[0]) - np.kron(tableau.A_float, Z)
        try:
            inverse = scipy.linalg.inv(system)
        except np.linalg.LinAlgError as exc:
            raise SingularStageMatrixError(f"I - A (x) Z for tableau {tableau.name}") from exc
        kron_norm = float(np.linalg.norm(inverse, 2))
        sup = self.resolvent_sup(tableau)
        slack = self.defaults.nevanlinna_slack
        return NevanlinnaProbe(
            log_norm=mu, kron_norm=kron_norm, boundary_sup=sup, slack=slack, holds=kron_norm <= sup + slack
        )

    @staticmethod
    def random_dissipative(dimension: int, rng: np.random.Generator, scale: float = 10.0) -> np.ndarray:
        """-B B^T + (C - C^T): symmetric part negative semidefinite."""
        B = rng.standard_normal((dimension, dimension)) * np.sqrt(scale)
        C = rng.standard_normal((dimension, dimension)) * scale
        return -B @ B.T + (C - C.T)

    @staticmethod
    def dirk_shortcut(tableau: ButcherTableau) -> bool:
        """Lower triangular with positive diagonal, or stiffly accurate with an explicit first stage."""
        if tableau.structure != MethodStructure.DIRK:
            return False
        diagonal = np.diag(tableau.A_float)
        if np.all(diagonal > 0):
            return True
        explicit_first = not np.any(tableau.A_float[0])
        return bool(tableau.stiffly_accurate and explicit_first and np.all(diagonal[1:] > 0))

    def report(self, tableau: ButcherTableau) -> StabilityReport:
        """Every stability fact of the tableau in one report."""
        R = self.stability_function(tableau)
        a_check = self.check_A_stability(tableau, R)
        asi_check = self.check_ASI_stability(tableau)
        as_check = self.check_AS_stability(tableau)
        r_check = self.check_R_condition(tableau, R)
        witnesses = {
            name: check.witness
            for name, check in (("A", a_check), ("ASI", asi_check), ("AS", as_check), ("R", r_check))
            if check.witness is not None
        }
        logger.info(
            "Stability checked",
            tableau=tableau.name,
            a=a_check.verdict.value,
            asi=asi_check.verdict.value,
            as_=as_check.verdict.value,
            r=r_check.verdict.value,
        )
        return StabilityReport(
            tableau=tableau.name,
            stability_function=R.describe(),
            numerator=R.numerator_float.tolist(),
            denominator=R.denominator_float.tolist(),
            r_at_infinity=R.value_at_infinity(),
            a_stable=a_check.verdict,
            as_stable=as_check.verdict,
            asi_stable=asi_check.verdict,
            r_condition=r_check.verdict,
            asi_sup=asi_check.sup_estimate,
            as_sup=as_check.sup_estimate,
            a_boundary_max=a_check.sup_estimate,
            witnesses=witnesses,
            samples=self.defaults.boundary_samples,
            stiffly_accurate=tableau.stiffly_accurate,
            dirk_shortcut=self.dirk_shortcut(tableau),
        )
