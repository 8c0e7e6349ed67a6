"""Convergence study API endpoints."""

from fastapi import APIRouter, Depends, status

from app.dependencies.logging import get_request_logger
from app.dependencies.services import get_analysis_service
from app.models.schemas.requests import StudyRequest, TaskAccepted
from app.models.schemas.study import ConvergenceStudy
from app.services.analysis_service import AnalysisService
from app.tasks.study_tasks import run_convergence_study

router = APIRouter(prefix="/studies", tags=["studies"])


@router.post(
    "",
    response_model=ConvergenceStudy,
    status_code=status.HTTP_200_OK,
    summary="Run a convergence study (synchronous)",
    description="Integrate every (h, lambda) cell and return errors, fitted orders and the predicted order",
)
def run_study(
    request: StudyRequest,
    service: AnalysisService = Depends(get_analysis_service),
    request_logger=Depends(get_request_logger),
) -> ConvergenceStudy:
    """Run a convergence study and wait for it."""
    request_logger.info("Study requested", tableau=request.tableau, problem=request.problem.value)
    return service.run_study_request(request)


@router.post(
    "/async",
    response_model=TaskAccepted,
    status_code=status.HTTP_202_ACCEPTED,
    summary="Run a convergence study (asynchronous)",
    description="Dispatch the study to a Celery worker and return the task id",
)
async def run_study_async(request: StudyRequest, request_logger=Depends(get_request_logger)) -> TaskAccepted:
    """Trigger a background study."""
    task = run_convergence_study.delay(request.model_dump(mode="json"))
    request_logger.info("Study dispatched", task_id=task.id)
    return TaskAccepted(message="Convergence study started", task_id=task.id, status="PENDING")
