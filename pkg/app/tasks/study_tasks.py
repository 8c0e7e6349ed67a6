"""Celery tasks for convergence studies."""

from typing import Dict

from loguru import logger

from app.models.schemas.requests import StudyRequest
from app.services.analysis_service import AnalysisService
from app.tasks.celery_app import celery_app


@celery_app.task(name="run_convergence_study", bind=True)
def run_convergence_study(self, request: Dict) -> Dict:
    """Celery task running a convergence study; the result is the JSON-mode study dump."""
    study_request = StudyRequest.model_validate(request)
    logger.info("Convergence study task started", task_id=self.request.id, problem=study_request.problem.value)
    study = AnalysisService().run_study_request(study_request)
    return study.model_dump(mode="json")
