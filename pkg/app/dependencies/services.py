"""Service providers for the HTTP layer."""

from functools import lru_cache

from app.services.analysis_service import AnalysisService


@lru_cache(maxsize=1)
def get_analysis_service() -> AnalysisService:
    """Shared analysis service; services hold no per-request state."""
    return AnalysisService()
