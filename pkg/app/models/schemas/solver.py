"""Integrator schemas."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import ANALYSIS_DEFAULTS
from app.models.enums import JacobianMode


class NewtonConfig(BaseModel):
    """Stage solver settings."""

    model_config = ConfigDict(frozen=True)

    atol: Optional[float] = Field(None, gt=0, description="Absolute increment tolerance, default 1e-12 * sqrt(N)")
    rtol: float = Field(ANALYSIS_DEFAULTS.newton_rtol, gt=0)
    max_iter: int = Field(ANALYSIS_DEFAULTS.newton_max_iter, ge=1)
    stall_limit: int = Field(ANALYSIS_DEFAULTS.newton_stall_limit, ge=1)
    jacobian: JacobianMode = JacobianMode.ANALYTIC

    def absolute_tolerance(self, dimension: int) -> float:
        if self.atol is not None:
            return self.atol
        return ANALYSIS_DEFAULTS.newton_atol_scale * float(np.sqrt(dimension))


class StepResult(BaseModel):
    """One Runge-Kutta step: new state, stages and per-stage Newton diagnostics."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y_next: np.ndarray
    stages: np.ndarray = Field(..., description="s x N array, row i is stage i")
    iterations: list[int]
    converged: list[bool]
    residuals: list[float] = Field(..., description="Stage-equation residual norm at the accepted stages")

    @model_validator(mode="after")
    def check_lengths(self) -> "StepResult":
        """One diagnostic entry per stage."""
        s = self.stages.shape[0]
        if not len(self.iterations) == len(self.converged) == len(self.residuals) == s:
            raise ValueError("stage diagnostics must have one entry per stage")
        return self

    @property
    def total_iterations(self) -> int:
        return sum(self.iterations)


class Trajectory(BaseModel):
    """States on the uniform grid t0 + n h."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tableau: str
    problem: str
    h: float
    times: np.ndarray
    states: np.ndarray = Field(..., description="(n + 1) x N")
    newton_iterations: list[int] = Field(..., description="Newton iterations per step, 0 for the initial row")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def header(self) -> list[str]:
        return ["t"] + [f"y{i + 1}" for i in range(self.states.shape[1])] + ["newton"]

    def rows(self) -> list[list[float | int]]:
        return [
            [float(t), *map(float, state), iterations]
            for t, state, iterations in zip(self.times, self.states, self.newton_iterations)
        ]


class MeanValueCheck(BaseModel):
    """Difference propagation y_{n+1} - y~_{n+1} = (R(Z) + h Lambda_n)(y_n - y~_n)."""

    lambda_norm: float = Field(..., ge=0)
    identity_residual: float = Field(..., ge=0, description="Relative mismatch of the propagation identity")
    probe_ratio: float = Field(..., ge=0, description="||(e_{n+1} - R(Z) e_n)|| / (h ||e_n||)")


class StepSizeBound(BaseModel):
    """h_bar = min(h_tilde, 1 / (2 L B ||A||))."""

    lipschitz: float
    resolvent_sup: float
    a_norm: float
    h_tilde: Optional[float] = None
    h_bar: float
