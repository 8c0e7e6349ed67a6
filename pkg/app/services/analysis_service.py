"""Analysis Service Module."""

from pathlib import Path
from typing import Optional, Union

from loguru import logger

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import TableauSourceError
from app.models.domain.tableau import ButcherTableau
from app.models.schemas.analysis import AnalysisReport
from app.models.schemas.order import TreeRow
from app.models.schemas.requests import StudyRequest
from app.models.schemas.study import ConvergenceStudy
from app.repositories.tableau_repository import TableauRepository
from app.services.condition_service import ConditionService
from app.services.stability_service import StabilityService
from app.services.study_service import StudyService
from app.services.tree_service import TreeService


class AnalysisService:
    """Everything the analyze report shows, in one place."""

    def __init__(
        self,
        tableau_repository: Optional[TableauRepository] = None,
        condition_service: Optional[ConditionService] = None,
        stability_service: Optional[StabilityService] = None,
        study_service: Optional[StudyService] = None,
    ) -> None:
        """Initialize AnalysisService with its collaborators."""
        self.tableau_repository = tableau_repository or TableauRepository()
        self.condition_service = condition_service or ConditionService()
        self.stability_service = stability_service or StabilityService()
        self.study_service = study_service or StudyService(
            condition_service=self.condition_service, stability_service=self.stability_service
        )

    @property
    def tree_service(self) -> TreeService:
        return self.condition_service.tree_service

    def resolve_tableau(self, catalog: Optional[str] = None, path: Optional[Union[str, Path]] = None) -> ButcherTableau:
        """Exactly one of a catalog name or a tableau file."""
        if (catalog is None) == (path is None):
            raise TableauSourceError()
        if catalog is not None:
            return self.tableau_repository.get(catalog)
        return self.tableau_repository.load(path)

    def request_tableau(self, request: StudyRequest) -> ButcherTableau:
        if request.document is not None:
            return self.tableau_repository.from_document(request.document.model_dump())
        return self.tableau_repository.get(request.tableau)

    def run_study_request(self, request: StudyRequest) -> ConvergenceStudy:
        """Run the convergence study a request describes."""
        return self.study_service.run_study(
            self.request_tableau(request),
            request.problem.value,
            hs=request.hs,
            lambdas=request.lambdas,
            t0=request.t0,
            tf=request.tf,
            jobs=request.jobs,
            tol=request.tol,
        )

    def analyze(
        self,
        tableau: ButcherTableau,
        max_order: int = ANALYSIS_DEFAULTS.max_order,
        tol: float = ANALYSIS_DEFAULTS.tol,
        compare_full: bool = False,
    ) -> AnalysisReport:
        """Stage, classical, weak stage and semilinear orders, stability verdicts and the predicted global order."""
        analysis_logger = logger.bind(tableau=tableau.name)
        analysis_logger.info("Starting tableau analysis", mode=tableau.mode.value, stages=tableau.s)

        tableau_service = self.condition_service.tableau_service
        order = self.condition_service.semilinear_order(tableau, max_order, tol)
        p_sl_full = None
        if compare_full:
            p_sl_full = self.condition_service.semilinear_order(tableau, max_order, tol, use_reduction=False).p_sl
            if p_sl_full != order.p_sl:
                analysis_logger.warning("Reduced and full tree sets disagree", reduced=order.p_sl, full=p_sl_full)

        stability = self.stability_service.report(tableau)
        verdicts = {"A": stability.a_stable, "AS": stability.as_stable, "ASI": stability.asi_stable}
        predicted = self.study_service.predicted_order(tableau, tol, verdicts)

        report = AnalysisReport(
            tableau=tableau.name,
            source=tableau.source,
            mode=tableau.mode,
            structure=tableau.structure,
            stages=tableau.s,
            stage_order=tableau_service.stage_order(tableau, tol),
            classical_order=tableau_service.classical_order(tableau, tol),
            weak_stage_order=self.condition_service.weak_stage_order(tableau, tol),
            p_sl=order.p_sl,
            p_sl_full=p_sl_full,
            order=order,
            stability=stability,
            predicted=predicted,
        )
        analysis_logger.success("Tableau analysis finished", p_sl=report.p_sl, q=predicted.q)
        return report

    def tree_listing(self, max_order: int, slca_only: bool = False) -> list[TreeRow]:
        """Trees of order 1..max_order with encodings, SLCA flags and exact zeta."""
        rows = [
            TreeRow(
                tree=tree.encoding,
                order=tree.order,
                slca=self.tree_service.is_semi_lone_child_avoiding(tree),
                zeta=str(self.tree_service.zeta(tree)),
            )
            for tree in self.tree_service.trees_up_to(max_order, slca_only)
        ]
        logger.debug("Tree listing built", max_order=max_order, slca_only=slca_only, rows=len(rows))
        return rows
