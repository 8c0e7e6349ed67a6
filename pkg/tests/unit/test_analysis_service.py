"""Unit tests for AnalysisService."""

from pathlib import Path

import pytest

from app.exceptions import TableauSourceError, UnknownCatalogEntryError
from app.models.enums import ConvergenceBranch, ScalarMode, Verdict
from app.models.schemas.requests import StudyRequest, TableauDocument
from app.services.analysis_service import AnalysisService


class TestResolveTableau:
    """Test suite for tableau source selection."""

    def test_neither_source(self, analysis_service: AnalysisService) -> None:
        """Test that a source is required."""
        with pytest.raises(TableauSourceError):
            analysis_service.resolve_tableau()

    def test_both_sources(self, analysis_service: AnalysisService, tmp_path: Path) -> None:
        """Test that two sources are refused."""
        with pytest.raises(TableauSourceError):
            analysis_service.resolve_tableau(catalog="trapezoid", path=tmp_path / "x.yaml")

    def test_catalog(self, analysis_service: AnalysisService) -> None:
        """Test resolution by name."""
        assert analysis_service.resolve_tableau(catalog="gauss-2").s == 2

    def test_unknown_catalog(self, analysis_service: AnalysisService) -> None:
        """Test that unknown names propagate."""
        with pytest.raises(UnknownCatalogEntryError):
            analysis_service.resolve_tableau(catalog="nope")

    def test_file(self, analysis_service: AnalysisService, tmp_path: Path) -> None:
        """Test resolution from a tableau file."""
        path = tmp_path / "euler.yaml"
        path.write_text("name: implicit-euler\nA: [[1]]\nb: [1]\n", encoding="utf-8")

        tableau = analysis_service.resolve_tableau(path=path)

        assert tableau.name == "implicit-euler"
        assert tableau.mode == ScalarMode.RATIONAL

    def test_request_document(self, analysis_service: AnalysisService) -> None:
        """Test that inline documents are parsed like files."""
        request = StudyRequest(document=TableauDocument(A=[["1/2"]], b=[1]))

        tableau = analysis_service.request_tableau(request)

        assert tableau.c_float[0] == 0.5


class TestAnalyze:
    """Test suite for the aggregate report."""

    def test_backward_euler(self, analysis_service: AnalysisService) -> None:
        """Test the full report of backward Euler."""
        report = analysis_service.analyze(analysis_service.resolve_tableau(catalog="backward-euler"))

        assert (report.stage_order, report.classical_order, report.weak_stage_order, report.p_sl) == (1, 1, 1, 1)
        assert report.stability.a_stable == Verdict.HOLDS
        assert report.predicted.q == 1
        assert report.predicted.branch == ConvergenceBranch.BASE
        assert report.p_sl_full is None

    def test_midpoint_superconvergence(self, analysis_service: AnalysisService) -> None:
        """Test the superconvergence branch of the implicit midpoint rule."""
        report = analysis_service.analyze(analysis_service.resolve_tableau(catalog="implicit-midpoint"))

        assert report.p_sl == 1
        assert report.classical_order == 2
        assert report.predicted.branch == ConvergenceBranch.SUPERCONVERGENCE
        assert report.predicted.q == 2

    def test_compare_full(self, analysis_service: AnalysisService) -> None:
        """Test that the full tree set confirms the reduced one."""
        report = analysis_service.analyze(analysis_service.resolve_tableau(catalog="radau-iia-2"), compare_full=True)

        assert report.p_sl_full == report.p_sl

    def test_report_serializes(self, analysis_service: AnalysisService) -> None:
        """Test that the report is plain JSON."""
        report = analysis_service.analyze(analysis_service.resolve_tableau(catalog="classical-rk4"), max_order=4)

        payload = report.model_dump(mode="json")

        assert payload["stability"]["r_at_infinity"] == "infinite"
        assert payload["predicted"]["branch"] == ConvergenceBranch.NO_GUARANTEE.value


class TestTreeListing:
    """Test suite for tree listings."""

    def test_counts(self, analysis_service: AnalysisService) -> None:
        """Test listing sizes through order five."""
        assert len(analysis_service.tree_listing(5)) == 17
        assert len(analysis_service.tree_listing(5, slca_only=True)) == 9

    def test_zeta_is_exact_text(self, analysis_service: AnalysisService) -> None:
        """Test that zeta is printed as an exact rational."""
        rows = {row.tree: row for row in analysis_service.tree_listing(5)}

        assert rows["[[[]][[]]]"].zeta == "-1/2"
        assert rows["[]"].zeta == "1"
