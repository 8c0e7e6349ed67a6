"""Convergence study schemas."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from app.models.enums import ConvergenceBranch, Verdict

STUDY_COLUMNS = ["lambda", "h", "error", "newton_total"]


class OrderFit(BaseModel):
    """Least-squares slope of log error against log h."""

    slope: float
    fit_residual: float = Field(..., ge=0, description="RMS residual of the log-log fit")
    constant: float = Field(..., description="C in error ~ C h^slope")
    used_points: int


class PredictedOrder(BaseModel):
    """Global order q predicted from p, p_SL and the R-condition."""

    q: int
    branch: ConvergenceBranch
    classical_order: int
    p_sl: int
    r_condition: Verdict
    explanation: str


class StudyCell(BaseModel):
    """One (lambda, h) run; ``error`` is None when the integration failed."""

    stiffness: float
    h: float
    error: Optional[float] = Field(None, ge=0)
    newton_total: int = 0
    failure: Optional[str] = None


class StiffnessFit(BaseModel):
    stiffness: float
    fit: Optional[OrderFit] = None
    failure: Optional[str] = None


class UniformityReport(BaseModel):
    """Per-stiffness constants C_lambda in error ~ C_lambda h^q.

    The error bound only requires sup over lambda of C_lambda to be finite, so ``growth`` (largest
    constant over the constant of the least stiff lambda) is the uniformity figure. ``ratio`` also
    counts constants that shrink with stiffness and is informational.
    """

    order: float
    constants: dict[str, float]
    growth: Optional[float] = Field(None, description="max C_lambda / C_lambda at the smallest |lambda|")
    ratio: Optional[float] = Field(None, description="max/min of the constants, None without two positive constants")


class ConvergenceStudy(BaseModel):
    """Global errors at tf over an (h, lambda) grid."""

    tableau: str
    problem: str
    t0: float
    tf: float
    hs: list[float]
    lambdas: list[float]
    cells: list[StudyCell]
    fits: list[StiffnessFit] = Field(default_factory=list)
    predicted: Optional[PredictedOrder] = None
    stability: dict[str, Verdict] = Field(default_factory=dict, description="Prerequisite verdicts, attached not enforced")
    uniformity: Optional[UniformityReport] = None

    def column(self, stiffness: float) -> list[StudyCell]:
        return [cell for cell in self.cells if cell.stiffness == stiffness]

    def error_matrix(self) -> np.ndarray:
        """len(lambdas) x len(hs), NaN where a cell failed."""
        matrix = np.full((len(self.lambdas), len(self.hs)), np.nan)
        rows = {lam: i for i, lam in enumerate(self.lambdas)}
        cols = {h: j for j, h in enumerate(self.hs)}
        for cell in self.cells:
            if cell.error is not None:
                matrix[rows[cell.stiffness], cols[cell.h]] = cell.error
        return matrix

    def failures(self) -> list[StudyCell]:
        return [cell for cell in self.cells if cell.failure is not None]

    def min_observed_order(self) -> Optional[float]:
        slopes = [entry.fit.slope for entry in self.fits if entry.fit is not None]
        return min(slopes) if slopes else None

    def records(self) -> list[dict[str, float | int | None]]:
        """Rows of the study table, column order fixed by STUDY_COLUMNS."""
        return [
            {"lambda": cell.stiffness, "h": cell.h, "error": cell.error, "newton_total": cell.newton_total}
            for cell in self.cells
        ]
