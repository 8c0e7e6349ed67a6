"""Tableau API endpoints."""

from typing import List

from fastapi import APIRouter, Depends, Query, status

from app.config import ANALYSIS_DEFAULTS
from app.dependencies.logging import get_request_logger
from app.dependencies.services import get_analysis_service
from app.models.schemas.analysis import AnalysisReport
from app.models.schemas.requests import TableauDocument
from app.services.analysis_service import AnalysisService

router = APIRouter(prefix="/tableaux", tags=["tableaux"])


@router.get(
    "",
    response_model=List[str],
    status_code=status.HTTP_200_OK,
    summary="List catalog tableaux",
    description="Names of the builtin Butcher tableaux",
)
def list_tableaux(service: AnalysisService = Depends(get_analysis_service)) -> List[str]:
    """List catalog tableau names."""
    return service.tableau_repository.names()


@router.get(
    "/{name}/analysis",
    response_model=AnalysisReport,
    status_code=status.HTTP_200_OK,
    summary="Analyze a catalog tableau",
    description="Stage, classical, weak stage and semilinear orders, stability verdicts and predicted global order",
)
def analyze_catalog_tableau(
    name: str,
    max_order: int = Query(ANALYSIS_DEFAULTS.max_order, ge=1, le=6),
    tol: float = Query(ANALYSIS_DEFAULTS.tol, gt=0),
    compare_full: bool = Query(False, description="Also check every tree without the redundancy reduction"),
    service: AnalysisService = Depends(get_analysis_service),
    request_logger=Depends(get_request_logger),
) -> AnalysisReport:
    """Analyze a catalog tableau."""
    request_logger.info("Analysis requested", tableau=name, max_order=max_order)
    tableau = service.resolve_tableau(catalog=name)
    return service.analyze(tableau, max_order=max_order, tol=tol, compare_full=compare_full)


@router.post(
    "/analysis",
    response_model=AnalysisReport,
    status_code=status.HTTP_200_OK,
    summary="Analyze a submitted tableau",
    description="Same report as the catalog endpoint for a tableau given in the file format",
)
def analyze_document(
    document: TableauDocument,
    max_order: int = Query(ANALYSIS_DEFAULTS.max_order, ge=1, le=6),
    tol: float = Query(ANALYSIS_DEFAULTS.tol, gt=0),
    compare_full: bool = Query(False),
    service: AnalysisService = Depends(get_analysis_service),
    request_logger=Depends(get_request_logger),
) -> AnalysisReport:
    """Analyze a tableau document."""
    tableau = service.tableau_repository.from_document(document.model_dump())
    request_logger.info("Analysis requested", tableau=tableau.name, stages=tableau.s, mode=tableau.mode.value)
    return service.analyze(tableau, max_order=max_order, tol=tol, compare_full=compare_full)
