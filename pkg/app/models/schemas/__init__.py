"""Report, request and response schemas."""

from app.models.schemas.analysis import AnalysisReport
from app.models.schemas.lte import LteCheck, LteSeries, LteVerification, RemainderProbe
from app.models.schemas.order import OrderReport, TreeCondition, TreeRow
from app.models.schemas.problem import DerivativeCheck, ProblemDiagnostics
from app.models.schemas.requests import StudyRequest, TableauDocument, TaskAccepted
from app.models.schemas.solver import MeanValueCheck, NewtonConfig, StepResult, StepSizeBound, Trajectory
from app.models.schemas.stability import CheckResult, NevanlinnaProbe, StabilityReport, Witness
from app.models.schemas.study import (
    ConvergenceStudy,
    OrderFit,
    PredictedOrder,
    StiffnessFit,
    StudyCell,
    UniformityReport,
)

__all__ = [
    "AnalysisReport",
    "OrderReport",
    "TreeCondition",
    "TreeRow",
    "CheckResult",
    "Witness",
    "NevanlinnaProbe",
    "StabilityReport",
    "DerivativeCheck",
    "ProblemDiagnostics",
    "NewtonConfig",
    "StepResult",
    "Trajectory",
    "MeanValueCheck",
    "StepSizeBound",
    "LteSeries",
    "LteCheck",
    "LteVerification",
    "RemainderProbe",
    "OrderFit",
    "PredictedOrder",
    "StudyCell",
    "StiffnessFit",
    "UniformityReport",
    "ConvergenceStudy",
    "StudyRequest",
    "TableauDocument",
    "TaskAccepted",
]
