"""Test fixtures and configuration."""

from typing import AsyncGenerator, Generator

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient
from httpx import AsyncClient

from app.dependencies.services import get_analysis_service
from app.main import app
from app.models.domain.tableau import ButcherTableau
from app.repositories.tableau_repository import TableauRepository
from app.services.analysis_service import AnalysisService
from app.services.condition_service import ConditionService
from app.services.lte_service import LteService
from app.services.problem_service import ProblemService
from app.services.solver_service import SolverService
from app.services.stability_service import StabilityService
from app.services.study_service import StudyService
from app.services.tree_service import TreeService


@pytest.fixture(scope="session")
def tableau_repository() -> TableauRepository:
    """Catalog and tableau file access."""
    return TableauRepository()


@pytest.fixture(scope="session")
def backward_euler(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("backward-euler")


@pytest.fixture(scope="session")
def implicit_midpoint(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("implicit-midpoint")


@pytest.fixture(scope="session")
def trapezoid(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("trapezoid")


@pytest.fixture(scope="session")
def gauss2(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("gauss-2")


@pytest.fixture(scope="session")
def radau_iia2(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("radau-iia-2")


@pytest.fixture(scope="session")
def rk4(tableau_repository: TableauRepository) -> ButcherTableau:
    return tableau_repository.get("classical-rk4")


@pytest.fixture
def tree_service() -> TreeService:
    return TreeService()


@pytest.fixture
def condition_service() -> ConditionService:
    return ConditionService()


@pytest.fixture
def stability_service() -> StabilityService:
    return StabilityService()


@pytest.fixture
def problem_service() -> ProblemService:
    return ProblemService()


@pytest.fixture
def solver_service(stability_service: StabilityService) -> SolverService:
    return SolverService(stability_service)


@pytest.fixture
def lte_service(solver_service: SolverService, condition_service: ConditionService) -> LteService:
    return LteService(
        tree_service=condition_service.tree_service,
        solver_service=solver_service,
        condition_service=condition_service,
    )


@pytest.fixture
def study_service(
    solver_service: SolverService, condition_service: ConditionService, stability_service: StabilityService
) -> StudyService:
    return StudyService(
        solver_service=solver_service, condition_service=condition_service, stability_service=stability_service
    )


@pytest.fixture
def analysis_service(
    condition_service: ConditionService, stability_service: StabilityService, study_service: StudyService
) -> AnalysisService:
    return AnalysisService(
        condition_service=condition_service, stability_service=stability_service, study_service=study_service
    )


@pytest.fixture
def cli_runner() -> CliRunner:
    """Click runner for the command-line tool."""
    return CliRunner()


@pytest.fixture(scope="function")
def client(analysis_service: AnalysisService) -> Generator[TestClient, None, None]:
    """Create a test client with a fresh analysis service."""
    app.dependency_overrides[get_analysis_service] = lambda: analysis_service

    with TestClient(app) as test_client:
        yield test_client

    app.dependency_overrides.clear()


@pytest.fixture(scope="function")
async def async_client(analysis_service: AnalysisService) -> AsyncGenerator[AsyncClient, None]:
    """Create an async test client with a fresh analysis service."""
    app.dependency_overrides[get_analysis_service] = lambda: analysis_service

    async with AsyncClient(app=app, base_url="http://test") as ac:
        yield ac

    app.dependency_overrides.clear()
