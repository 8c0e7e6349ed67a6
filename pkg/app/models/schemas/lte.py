"""Local truncation error schemas."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class LteSeries(BaseModel):
    """Power-series coefficients of the one-step error in h, at fixed Z.

    ``step[i - 1]`` is the N-vector coefficient of h^i, ``stage[i - 1]`` the s x N stage coefficient.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tableau: str
    problem: str
    t0: float
    Z: np.ndarray
    step: list[np.ndarray]
    stage: list[np.ndarray]

    @property
    def max_order(self) -> int:
        return len(self.step)

    def truncated(self, h: float, through: int) -> np.ndarray:
        """sum_{i <= through} h^i step_i."""
        total = np.zeros_like(self.step[0]) if self.step else np.zeros(self.Z.shape[0])
        for i, coefficient in enumerate(self.step[:through], start=1):
            total = total + h**i * coefficient
        return total

    def max_relative_difference(self, other: "LteSeries") -> float:
        """Largest per-order mismatch of the step and stage coefficients, each relative to its own size."""
        pairs = list(zip(self.step, other.step)) + list(zip(self.stage, other.stage))
        floor = 1e-14 * max((max(np.linalg.norm(a), np.linalg.norm(b)) for a, b in pairs), default=0.0)
        worst = 0.0
        for a, b in pairs:
            scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), floor, np.finfo(float).tiny)
            worst = max(worst, float(np.linalg.norm(a - b)) / scale)
        return worst


class RemainderProbe(BaseModel):
    """Log-log fit of ||one-step error - series through order m|| against h."""

    order: int = Field(..., ge=0, description="Series terms subtracted")
    hs: list[float]
    remainders: list[float]
    slope: float
    fit_residual: float
    constant: float = Field(..., description="C in remainder ~ C h^slope")


class LteCheck(BaseModel):
    """Consistency of the error expansions for one stiffness value."""

    stiffness: float
    h: float
    tree_vs_direct: float = Field(..., description="Max relative difference of the two expansions")
    closed_form_difference: float = Field(..., description="Order <= 3 mismatch against the closed form")
    vanishing_through: int = Field(..., description="Largest i with all step coefficients <= tol up to i")
    agrees: bool


class LteVerification(BaseModel):
    """lte-verify summary."""

    tableau: str
    problem: str
    max_order: int
    p_sl: int
    checks: list[LteCheck]
    abstract_recursion_ok: bool
    remainder: Optional[RemainderProbe] = None

    @property
    def ok(self) -> bool:
        return self.abstract_recursion_ok and all(check.agrees for check in self.checks)
