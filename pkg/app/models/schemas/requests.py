"""HTTP request and response bodies."""

from typing import Optional, Union

from pydantic import BaseModel, Field, model_validator

from app.config import ANALYSIS_DEFAULTS
from app.models.enums import ProblemName

Scalar = Union[int, float, str]


class TableauDocument(BaseModel):
    """Tableau in the file format: exact entries as integers or "p/q" strings, floats otherwise."""

    name: str = Field("unnamed", description="Tableau name")
    A: list[list[Scalar]] = Field(..., description="Butcher matrix, row-major")
    b: list[Scalar] = Field(..., description="Weights")
    c: Optional[list[Scalar]] = Field(None, description="Abscissae; defaults to the row sums of A")
    source: Optional[str] = Field(None, description="Literature reference")


class StudyRequest(BaseModel):
    """Convergence study parameters; exactly one of ``tableau`` and ``document``."""

    tableau: Optional[str] = Field(None, description="Catalog name")
    document: Optional[TableauDocument] = Field(None, description="Inline tableau")
    problem: ProblemName = Field(ProblemName.NPR_SCALAR, description="Builtin problem")
    hs: Optional[list[float]] = Field(None, description="Step sizes; default (tf - t0) 2^-3 .. 2^-12")
    lambdas: Optional[list[float]] = Field(None, description="Stiffness values, all negative")
    t0: float = ANALYSIS_DEFAULTS.t0
    tf: float = ANALYSIS_DEFAULTS.tf
    jobs: int = Field(ANALYSIS_DEFAULTS.jobs, ge=1, le=32)
    tol: float = Field(ANALYSIS_DEFAULTS.tol, gt=0)

    @model_validator(mode="after")
    def check_source(self) -> "StudyRequest":
        """Exactly one tableau source."""
        if (self.tableau is None) == (self.document is None):
            raise ValueError("give exactly one of 'tableau' and 'document'")
        return self


class TaskAccepted(BaseModel):
    """Response of an asynchronous dispatch."""

    message: str
    task_id: str
    status: str = "PENDING"
