"""Order-condition report schemas."""

from typing import Optional

from pydantic import BaseModel, Field

from app.models.enums import ScalarMode


class TreeCondition(BaseModel):
    """Outcome of the semilinear conditions of one tree."""

    tree: str = Field(..., description="Nested-bracket encoding")
    order: int = Field(..., ge=1)
    satisfied: Optional[bool] = Field(None, description="None when the tree was skipped as redundant")
    max_residual: float = Field(0.0, ge=0)
    residual_count: int = Field(0, ge=0)
    skipped: bool = False


class OrderReport(BaseModel):
    """Semilinear order of a tableau with per-tree detail."""

    tableau: str
    mode: ScalarMode
    p_sl: int = Field(..., ge=0, description="Largest m with every checked tree of order <= m satisfied")
    max_order: int = Field(..., ge=1)
    tol: float
    reduction_used: bool
    trees: list[TreeCondition] = Field(default_factory=list)

    def failing(self) -> list[TreeCondition]:
        return [row for row in self.trees if row.satisfied is False]


class TreeRow(BaseModel):
    """One line of a tree listing."""

    tree: str
    order: int
    slca: bool = Field(..., description="Semi-lone-child-avoiding")
    zeta: str = Field(..., description="Exact combinatorial factor")
