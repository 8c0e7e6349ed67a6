"""Study service module."""

import io
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import AppException, InsufficientDataError, InvalidGridError, StudyFileError
from app.models.domain.problem import SemilinearProblem
from app.models.domain.tableau import ButcherTableau
from app.models.enums import ConvergenceBranch, Verdict
from app.models.schemas.solver import NewtonConfig
from app.models.schemas.study import (
    STUDY_COLUMNS,
    ConvergenceStudy,
    OrderFit,
    PredictedOrder,
    StiffnessFit,
    StudyCell,
    UniformityReport,
)
from app.services.condition_service import ConditionService
from app.services.problem_service import ProblemService
from app.services.solver_service import SolverService
from app.services.stability_service import StabilityService
from app.services.tableau_service import TableauService

SATURATION_FACTOR = 100.0
_POWER = re.compile(r"^\s*2\^(-?\d+)\s*$")


def _usable(
    errors: Sequence[Optional[float]], hs: Sequence[float], solution_norm: float
) -> tuple[np.ndarray, np.ndarray]:
    """Drop failed cells and points saturated by round-off."""
    floor = SATURATION_FACTOR * np.finfo(float).eps * max(solution_norm, np.finfo(float).tiny)
    keep = [(h, e) for h, e in zip(hs, errors) if e is not None and np.isfinite(e) and e > floor]
    if not keep:
        return np.array([]), np.array([])
    used_h, used_e = zip(*keep)
    return np.asarray(used_h, dtype=float), np.asarray(used_e, dtype=float)


def estimate_order(
    errors: Sequence[Optional[float]], hs: Sequence[float], solution_norm: float = 1.0
) -> OrderFit:
    """Least-squares slope of log(error) against log(h)."""
    used_h, used_e = _usable(errors, hs, solution_norm)
    if used_h.size < 3:
        raise InsufficientDataError(int(used_h.size))
    x, y = np.log(used_h), np.log(used_e)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return OrderFit(
        slope=float(slope), fit_residual=residual, constant=float(np.exp(intercept)), used_points=used_h.size
    )


def stiffness_growth(constants: Mapping[float, float]) -> Optional[float]:
    """max_lambda C_lambda / C_lambda at the least stiff lambda; None when that constant is not positive."""
    if not constants:
        return None
    reference = constants[min(constants, key=abs)]
    if not reference > 0:
        return None
    return max(constants.values()) / reference


def geometric_grid(
    t0: float = ANALYSIS_DEFAULTS.t0,
    tf: float = ANALYSIS_DEFAULTS.tf,
    exponents: tuple[int, int] = ANALYSIS_DEFAULTS.h_exponents,
) -> list[float]:
    """(tf - t0) * 2^-k for k in the inclusive exponent range."""
    low, high = exponents
    return [(tf - t0) * 2.0**-k for k in range(low, high + 1)]


def parse_h_grid(spec: str, t0: float = ANALYSIS_DEFAULTS.t0, tf: float = ANALYSIS_DEFAULTS.tf) -> list[float]:
    """``2^-3..2^-8`` (scaled to the interval) or a comma-separated list of positive step sizes."""
    text = spec.strip()
    if ".." in text:
        low, _, high = text.partition("..")
        bounds = [_POWER.match(low), _POWER.match(high)]
        if not all(bounds):
            raise InvalidGridError(spec, "ranges must look like 2^-3..2^-8")
        first, last = (-int(match.group(1)) for match in bounds)
        if first > last:
            raise InvalidGridError(spec, "range must go from coarse to fine")
        return geometric_grid(t0, tf, (first, last))
    values = _parse_floats(spec)
    if any(value <= 0 for value in values):
        raise InvalidGridError(spec, "step sizes must be positive")
    return values


def parse_lambdas(spec: str) -> list[float]:
    """Comma-separated negative stiffness values."""
    values = _parse_floats(spec)
    if any(value >= 0 for value in values):
        raise InvalidGridError(spec, "stiffness values must be negative")
    return values


def _parse_floats(spec: str) -> list[float]:
    items = [item.strip() for item in spec.split(",") if item.strip()]
    if not items:
        raise InvalidGridError(spec, "grid is empty")
    try:
        return [float(item) for item in items]
    except ValueError as exc:
        raise InvalidGridError(spec, str(exc)) from exc


class StudyService:
    """Convergence studies over (h, lambda) grids."""

    def __init__(
        self,
        problem_service: Optional[ProblemService] = None,
        solver_service: Optional[SolverService] = None,
        condition_service: Optional[ConditionService] = None,
        stability_service: Optional[StabilityService] = None,
    ) -> None:
        """Initialize service."""
        self.problem_service = problem_service or ProblemService()
        self.stability_service = stability_service or StabilityService()
        self.solver_service = solver_service or SolverService(self.stability_service)
        self.condition_service = condition_service or ConditionService()

    @property
    def tableau_service(self) -> TableauService:
        return self.condition_service.tableau_service

    def estimate_order(
        self, errors: Sequence[Optional[float]], hs: Sequence[float], solution_norm: float = 1.0
    ) -> OrderFit:
        return estimate_order(errors, hs, solution_norm)

    def stability_verdicts(self, tableau: ButcherTableau) -> dict[str, Verdict]:
        return {
            "A": self.stability_service.check_A_stability(tableau).verdict,
            "AS": self.stability_service.check_AS_stability(tableau).verdict,
            "ASI": self.stability_service.check_ASI_stability(tableau).verdict,
        }

    def predicted_order(
        self,
        tableau: ButcherTableau,
        tol: float = ANALYSIS_DEFAULTS.tol,
        stability: Optional[dict[str, Verdict]] = None,
    ) -> PredictedOrder:
        """q = p_SL + 1 when p = p_SL + 1 and the R-condition holds, otherwise q = p_SL."""
        p = self.tableau_service.classical_order(tableau, tol)
        p_sl = self.condition_service.semilinear_order(tableau, ANALYSIS_DEFAULTS.max_order, tol).p_sl
        r_condition = self.stability_service.check_R_condition(tableau).verdict
        stability = stability or self.stability_verdicts(tableau)

        if stability["AS"] == Verdict.FAILS or stability["ASI"] == Verdict.FAILS:
            branch, q = ConvergenceBranch.NO_GUARANTEE, p_sl
            explanation = (
                f"AS/ASI-stability fails (AS {stability['AS']}, ASI {stability['ASI']}); "
                f"p_SL = {p_sl} carries no stiffness-uniform guarantee"
            )
        elif p == p_sl + 1 and r_condition == Verdict.HOLDS:
            branch, q = ConvergenceBranch.SUPERCONVERGENCE, p_sl + 1
            explanation = f"p = {p} = p_SL + 1 and the R-condition holds: q = p_SL + 1 = {q}"
        else:
            branch, q = ConvergenceBranch.BASE, p_sl
            reason = f"p = {p} != p_SL + 1" if p != p_sl + 1 else f"R-condition {r_condition}"
            explanation = f"{reason}: base branch q = p_SL = {q}"
        logger.info("Predicted global order", tableau=tableau.name, q=q, branch=branch.value)
        return PredictedOrder(
            q=q, branch=branch, classical_order=p, p_sl=p_sl, r_condition=r_condition, explanation=explanation
        )

    def _run_cell(
        self,
        tableau: ButcherTableau,
        problem: SemilinearProblem,
        h: float,
        cfg: NewtonConfig,
        t0: float,
        tf: float,
    ) -> StudyCell:
        log = logger.bind(tableau=tableau.name, problem=problem.name, stiffness=problem.stiffness, h=h)
        try:
            trajectory = self.solver_service.integrate(tableau, problem, t0, tf, h, cfg)
        except AppException as exc:
            log.warning("Study cell failed", reason=exc.detail)
            return StudyCell(stiffness=problem.stiffness, h=h, failure=exc.detail)
        error = np.linalg.norm(problem.exact(float(trajectory.times[-1])) - trajectory.final) / np.sqrt(problem.N)
        if not np.isfinite(error):
            log.warning("Study cell diverged")
            return StudyCell(stiffness=problem.stiffness, h=h, failure="non-finite error at tf")
        log.debug("Study cell finished", error=float(error))
        return StudyCell(
            stiffness=problem.stiffness, h=h, error=float(error), newton_total=sum(trajectory.newton_iterations)
        )

    def run_study(
        self,
        tableau: ButcherTableau,
        problem_name: str,
        hs: Optional[Sequence[float]] = None,
        lambdas: Optional[Sequence[float]] = None,
        cfg: Optional[NewtonConfig] = None,
        t0: float = ANALYSIS_DEFAULTS.t0,
        tf: float = ANALYSIS_DEFAULTS.tf,
        jobs: int = ANALYSIS_DEFAULTS.jobs,
        tol: float = ANALYSIS_DEFAULTS.tol,
    ) -> ConvergenceStudy:
        """Integrate every (h, lambda) cell from the exact initial value and fit observed orders."""
        hs = list(hs) if hs is not None else geometric_grid(t0, tf)
        lambdas = list(lambdas) if lambdas is not None else list(ANALYSIS_DEFAULTS.lambdas)
        if not hs or not lambdas:
            raise InvalidGridError("", "study needs at least one step size and one stiffness value")
        for h in hs:
            self.solver_service.step_count(t0, tf, h)
        cfg = cfg or NewtonConfig()

        problems = {lam: self.problem_service.builtin_problem(problem_name, lam) for lam in lambdas}
        stability = self.stability_verdicts(tableau)
        predicted = self.predicted_order(tableau, tol, stability)
        logger.info(
            "Starting convergence study",
            tableau=tableau.name,
            problem=problem_name,
            cells=len(hs) * len(lambdas),
            jobs=jobs,
        )

        grid = [(lam, h) for lam in lambdas for h in hs]
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
            cells = list(
                executor.map(lambda cell: self._run_cell(tableau, problems[cell[0]], cell[1], cfg, t0, tf), grid)
            )

        scales = {
            lam: float(np.linalg.norm(problem.exact(tf)) / np.sqrt(problem.N)) for lam, problem in problems.items()
        }
        fits = []
        for lam in lambdas:
            column = [cell for cell in cells if cell.stiffness == lam]
            try:
                fit = estimate_order([cell.error for cell in column], [cell.h for cell in column], scales[lam])
                fits.append(StiffnessFit(stiffness=lam, fit=fit))
            except InsufficientDataError as exc:
                fits.append(StiffnessFit(stiffness=lam, failure=exc.detail))

        study = ConvergenceStudy(
            tableau=tableau.name,
            problem=problem_name,
            t0=t0,
            tf=tf,
            hs=hs,
            lambdas=lambdas,
            cells=cells,
            fits=fits,
            predicted=predicted,
            stability=stability,
        )
        study = study.model_copy(update={"uniformity": self.uniformity_report(study, solution_norms=scales)})
        logger.success(
            "Convergence study finished",
            tableau=tableau.name,
            problem=problem_name,
            min_order=study.min_observed_order(),
            failures=len(study.failures()),
        )
        return study

    def uniformity_report(
        self,
        study: ConvergenceStudy,
        order: Optional[float] = None,
        solution_norms: Optional[Mapping[float, float]] = None,
    ) -> UniformityReport:
        """C_lambda = geometric mean of error / h^q per stiffness value, with growth and max/min across lambda.

        ``solution_norms`` sets the round-off floor of each lambda column (1.0 when missing).
        """
        if order is None:
            order = float(study.predicted.q) if study.predicted is not None else study.min_observed_order() or 1.0
        solution_norms = solution_norms or {}
        by_stiffness: dict[float, float] = {}
        for lam in study.lambdas:
            column = study.column(lam)
            used_h, used_e = _usable(
                [cell.error for cell in column], [cell.h for cell in column], solution_norms.get(lam, 1.0)
            )
            if used_h.size:
                by_stiffness[lam] = float(np.exp(np.mean(np.log(used_e) - order * np.log(used_h))))
        values = list(by_stiffness.values())
        ratio = max(values) / min(values) if values and min(values) > 0 else None
        return UniformityReport(
            order=order,
            constants={repr(lam): value for lam, value in by_stiffness.items()},
            growth=stiffness_growth(by_stiffness),
            ratio=ratio,
        )

    @staticmethod
    def to_frame(study: ConvergenceStudy) -> pd.DataFrame:
        return pd.DataFrame.from_records(study.records(), columns=STUDY_COLUMNS)

    def table_text(self, study: ConvergenceStudy) -> str:
        """The study table as CSV text."""
        return self.to_frame(study).to_csv(index=False)

    def write_table(self, study: ConvergenceStudy, path: Union[str, Path]) -> None:
        self.to_frame(study).to_csv(path, index=False)
        logger.info("Study table written", path=str(path), rows=len(study.cells))

    def read_table(self, source: Union[str, Path, io.StringIO]) -> list[StudyCell]:
        """Parse a study table back into cells; failed cells have an empty error column."""
        try:
            frame = pd.read_csv(source)
        except (OSError, ValueError, pd.errors.ParserError) as exc:
            raise StudyFileError(str(exc)) from exc
        if list(frame.columns) != STUDY_COLUMNS:
            raise StudyFileError(f"expected columns {STUDY_COLUMNS}, got {list(frame.columns)}")
        cells = []
        for row in frame.itertuples(index=False):
            stiffness, h, error, newton_total = row
            if pd.isna(stiffness) or pd.isna(h) or pd.isna(newton_total):
                raise StudyFileError(f"missing value in row {len(cells) + 1}")
            failed = pd.isna(error)
            try:
                cells.append(
                    StudyCell(
                        stiffness=float(stiffness),
                        h=float(h),
                        error=None if failed else float(error),
                        newton_total=int(newton_total),
                        failure="recorded failure" if failed else None,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise StudyFileError(f"row {len(cells) + 1}: {exc}") from exc
        return cells
