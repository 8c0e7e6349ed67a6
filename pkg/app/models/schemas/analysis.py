"""Aggregate tableau analysis schema."""

from typing import Optional

from pydantic import BaseModel, Field

from app.models.enums import MethodStructure, ScalarMode
from app.models.schemas.order import OrderReport
from app.models.schemas.stability import StabilityReport
from app.models.schemas.study import PredictedOrder


class AnalysisReport(BaseModel):
    """Order and stability facts of one tableau."""

    tableau: str
    source: Optional[str] = None
    mode: ScalarMode
    structure: MethodStructure
    stages: int = Field(..., ge=1)
    stage_order: int
    classical_order: int
    weak_stage_order: int
    p_sl: int
    p_sl_full: Optional[int] = Field(None, description="p_SL over all trees, present when requested")
    order: OrderReport
    stability: StabilityReport
    predicted: PredictedOrder
