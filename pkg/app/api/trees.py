"""Rooted tree API endpoints."""

from typing import List

from fastapi import APIRouter, Depends, Query, status

from app.dependencies.services import get_analysis_service
from app.models.schemas.order import TreeRow
from app.services.analysis_service import AnalysisService

router = APIRouter(prefix="/trees", tags=["trees"])


@router.get(
    "",
    response_model=List[TreeRow],
    status_code=status.HTTP_200_OK,
    summary="List rooted trees",
    description="Trees of order 1..max_order with bracket encodings, SLCA flags and combinatorial factors",
)
def list_trees(
    max_order: int = Query(5, ge=1, le=10),
    slca_only: bool = Query(False, description="Only semi-lone-child-avoiding trees"),
    service: AnalysisService = Depends(get_analysis_service),
) -> List[TreeRow]:
    """List rooted trees."""
    return service.tree_listing(max_order, slca_only)
