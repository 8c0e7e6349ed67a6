"""Unit tests for StudyService."""

import io
from pathlib import Path

import numpy as np
import pytest

from app.exceptions import IncommensurateStepError, InsufficientDataError, InvalidGridError, StudyFileError
from app.models.domain.tableau import ButcherTableau
from app.models.enums import ConvergenceBranch
from app.models.schemas.solver import NewtonConfig
from app.models.schemas.study import STUDY_COLUMNS, ConvergenceStudy, StudyCell
from app.repositories.tableau_repository import TableauRepository
from app.services.study_service import (
    StudyService,
    estimate_order,
    geometric_grid,
    parse_h_grid,
    parse_lambdas,
    stiffness_growth,
)


def _grid(low: int, high: int) -> list[float]:
    return [2.0**-k for k in range(low, high + 1)]


class TestOrderFit:
    """Test suite for the log-log slope estimate."""

    def test_exact_power_law(self) -> None:
        """Test slope and constant of 3 h^2."""
        hs = _grid(2, 6)

        fit = estimate_order([3.0 * h**2 for h in hs], hs)

        assert fit.slope == pytest.approx(2.0)
        assert fit.constant == pytest.approx(3.0)
        assert fit.fit_residual < 1e-12
        assert fit.used_points == 5

    def test_failed_and_saturated_points_are_dropped(self) -> None:
        """Test that None and round-off level errors do not enter the fit."""
        hs = _grid(2, 7)
        errors = [h**2 for h in hs[:4]] + [None, 1e-18]

        fit = estimate_order(errors, hs)

        assert fit.used_points == 4
        assert fit.slope == pytest.approx(2.0)

    def test_too_few_points(self) -> None:
        """Test that two usable points are not enough."""
        with pytest.raises(InsufficientDataError):
            estimate_order([1e-2, 1e-3, None], [0.1, 0.05, 0.025])


class TestGrids:
    """Test suite for step-size and stiffness grid parsing."""

    def test_power_range(self) -> None:
        """Test the 2^-a..2^-b form."""
        assert parse_h_grid("2^-3..2^-5") == [0.125, 0.0625, 0.03125]

    def test_range_scales_with_interval(self) -> None:
        """Test that ranges are fractions of tf - t0."""
        assert parse_h_grid("2^-1..2^-2", t0=0.0, tf=2.0) == [1.0, 0.5]

    def test_explicit_list(self) -> None:
        """Test a comma-separated list."""
        assert parse_h_grid("0.5, 0.25") == [0.5, 0.25]

    @pytest.mark.parametrize("spec", ["2^-5..2^-3", "empty", "", "0.1,-0.2", "2^-3..4", " , "])
    def test_bad_h_grids(self, spec: str) -> None:
        """Test malformed step-size grids."""
        with pytest.raises(InvalidGridError):
            parse_h_grid(spec)

    def test_lambdas(self) -> None:
        """Test parsing of stiffness values."""
        assert parse_lambdas("-1, -1e3,-1e6") == [-1.0, -1e3, -1e6]

    @pytest.mark.parametrize("spec", ["-1,2", "0", "x"])
    def test_bad_lambdas(self, spec: str) -> None:
        """Test that nonnegative or non-numeric values are rejected."""
        with pytest.raises(InvalidGridError):
            parse_lambdas(spec)

    def test_default_grid(self) -> None:
        """Test the default geometric grid on [0, 1]."""
        grid = geometric_grid()

        assert grid[0] == 2.0**-3
        assert grid[-1] == 2.0**-12


class TestPredictedOrder:
    """Test suite for the predicted global order."""

    @pytest.mark.parametrize(
        "name, q, branch",
        [
            ("implicit-midpoint", 2, ConvergenceBranch.SUPERCONVERGENCE),
            ("backward-euler", 1, ConvergenceBranch.BASE),
            ("trapezoid", 2, ConvergenceBranch.BASE),
            ("gauss-2", None, ConvergenceBranch.BASE),
            ("classical-rk4", None, ConvergenceBranch.NO_GUARANTEE),
        ],
    )
    def test_branches(
        self,
        study_service: StudyService,
        tableau_repository: TableauRepository,
        name: str,
        q: int | None,
        branch: ConvergenceBranch,
    ) -> None:
        """Test q and the branch taken for catalog tableaux."""
        predicted = study_service.predicted_order(tableau_repository.get(name))

        assert predicted.branch == branch
        if q is not None:
            assert predicted.q == q
        assert predicted.explanation


class TestConvergenceStudies:
    """Test suite for observed orders on stiff problems."""

    def test_backward_euler_first_order(self, study_service: StudyService, backward_euler: ButcherTableau) -> None:
        """Test order one for very stiff lambda."""
        study = study_service.run_study(backward_euler, "npr-scalar", hs=_grid(3, 8), lambdas=[-1e6])

        assert study.fits[0].fit is not None
        assert study.fits[0].fit.slope == pytest.approx(1.0, abs=0.1)
        assert not study.failures()

    def test_trapezoid_second_order(self, study_service: StudyService, trapezoid: ButcherTableau) -> None:
        """Test order two for the trapezoidal rule."""
        study = study_service.run_study(trapezoid, "npr-scalar", hs=_grid(3, 10), lambdas=[-1e2])

        assert study.min_observed_order() == pytest.approx(2.0, abs=0.2)

    @pytest.mark.parametrize("stiffness", [-1e2, -1e6])
    def test_midpoint_superconverges(
        self, study_service: StudyService, implicit_midpoint: ButcherTableau, stiffness: float
    ) -> None:
        """Test that the midpoint rule reaches order p_SL + 1 = 2."""
        study = study_service.run_study(implicit_midpoint, "npr-scalar", hs=_grid(3, 9), lambdas=[stiffness])

        assert study.predicted is not None
        assert study.predicted.q == 2
        assert study.min_observed_order() == pytest.approx(2.0, abs=0.2)

    def test_parallel_cells_match_serial(self, study_service: StudyService, trapezoid: ButcherTableau) -> None:
        """Test that worker threads do not change the results."""
        kwargs = dict(hs=_grid(3, 6), lambdas=[-1.0, -1e3])

        serial = study_service.run_study(trapezoid, "npr-2d", **kwargs)
        parallel = study_service.run_study(trapezoid, "npr-2d", jobs=4, **kwargs)

        assert serial.records() == parallel.records()
        assert np.array_equal(serial.error_matrix(), parallel.error_matrix())

    def test_failed_cells_are_recorded(self, study_service: StudyService, backward_euler: ButcherTableau) -> None:
        """Test that Newton failures become failed cells instead of aborting."""
        study = study_service.run_study(
            backward_euler, "npr-scalar", hs=_grid(3, 5), lambdas=[-1.0], cfg=NewtonConfig(max_iter=1)
        )

        assert len(study.failures()) == 3
        assert all(cell.error is None for cell in study.cells)
        assert study.fits[0].fit is None
        assert study.fits[0].failure
        assert np.isnan(study.error_matrix()).all()

    def test_incommensurate_grid(self, study_service: StudyService, trapezoid: ButcherTableau) -> None:
        """Test that the grid is checked before any integration."""
        with pytest.raises(IncommensurateStepError):
            study_service.run_study(trapezoid, "npr-scalar", hs=[0.3], lambdas=[-1.0])

    def test_uniformity(self, study_service: StudyService, trapezoid: ButcherTableau) -> None:
        """Test the per-stiffness constants and that they do not grow with stiffness."""
        study = study_service.run_study(trapezoid, "npr-scalar", hs=_grid(3, 7), lambdas=[-1e2, -1e4])

        assert study.uniformity is not None
        assert set(study.uniformity.constants) == {repr(-1e2), repr(-1e4)}
        assert study.uniformity.growth is not None and study.uniformity.growth <= 10.0
        assert study.uniformity.ratio is not None and study.uniformity.ratio >= study.uniformity.growth

    @pytest.mark.parametrize("name", ["backward-euler", "trapezoid", "implicit-midpoint"])
    @pytest.mark.parametrize("problem_name", ["npr-scalar", "npr-2d"])
    def test_orders_match_prediction(
        self,
        study_service: StudyService,
        tableau_repository: TableauRepository,
        name: str,
        problem_name: str,
    ) -> None:
        """Test observed orders within 0.2 of q and bounded constants for lambda down to -1e6."""
        study = study_service.run_study(tableau_repository.get(name), problem_name, lambdas=[-1e2, -1e4, -1e6])

        assert study.predicted is not None
        assert not study.failures()
        for entry in study.fits:
            assert entry.fit is not None
            assert entry.fit.slope == pytest.approx(study.predicted.q, abs=0.2)
        assert study.uniformity is not None
        assert study.uniformity.growth is not None and study.uniformity.growth <= 10.0


class TestUniformityStatistics:
    """Test suite for the stiffness growth of the error constants."""

    def test_shrinking_constants(self) -> None:
        """Test that constants falling with stiffness give growth one."""
        assert stiffness_growth({-1e2: 2.0, -1e4: 0.02, -1e6: 2e-4}) == pytest.approx(1.0)

    def test_growing_constants(self) -> None:
        """Test growth relative to the least stiff value."""
        assert stiffness_growth({-1e6: 30.0, -1.0: 1.0, -1e3: 4.0}) == pytest.approx(30.0)

    def test_degenerate_constants(self) -> None:
        """Test that an empty map or a zero reference gives no growth."""
        assert stiffness_growth({}) is None
        assert stiffness_growth({-1.0: 0.0, -1e3: 1.0}) is None

    def test_round_off_floor_per_stiffness(self, study_service: StudyService) -> None:
        """Test that each lambda column is filtered with its own solution norm."""
        cells = [
            StudyCell(stiffness=-1.0, h=0.5, error=1e-12),
            StudyCell(stiffness=-1.0, h=0.25, error=2.5e-13),
            StudyCell(stiffness=-1e3, h=0.5, error=0.25),
            StudyCell(stiffness=-1e3, h=0.25, error=0.0625),
        ]
        study = ConvergenceStudy(
            tableau="t", problem="p", t0=0.0, tf=1.0, hs=[0.5, 0.25], lambdas=[-1.0, -1e3], cells=cells
        )

        unscaled = study_service.uniformity_report(study, order=2.0)
        scaled = study_service.uniformity_report(study, order=2.0, solution_norms={-1.0: 1e3, -1e3: 1.0})

        assert set(unscaled.constants) == {repr(-1.0), repr(-1e3)}
        assert unscaled.constants[repr(-1e3)] == pytest.approx(1.0)
        assert set(scaled.constants) == {repr(-1e3)}
        assert scaled.growth == pytest.approx(1.0)


class TestStudyTables:
    """Test suite for writing and reading study tables."""

    def test_round_trip(self, study_service: StudyService, trapezoid: ButcherTableau, tmp_path: Path) -> None:
        """Test that a written table reads back as the same cells."""
        study = study_service.run_study(trapezoid, "npr-scalar", hs=_grid(3, 5), lambdas=[-1.0, -1e2])
        path = tmp_path / "study.csv"

        study_service.write_table(study, path)
        cells = study_service.read_table(path)

        assert [(cell.stiffness, cell.h, cell.newton_total) for cell in cells] == [
            (cell.stiffness, cell.h, cell.newton_total) for cell in study.cells
        ]
        assert [cell.error for cell in cells] == pytest.approx([cell.error for cell in study.cells], rel=1e-12)

    def test_failed_cells_have_empty_error(self, study_service: StudyService) -> None:
        """Test that an empty error column marks a failure."""
        text = ",".join(STUDY_COLUMNS) + "\n-1.0,0.125,,3\n"

        cells = study_service.read_table(io.StringIO(text))

        assert cells[0].error is None
        assert cells[0].failure

    def test_wrong_columns(self, study_service: StudyService) -> None:
        """Test that the header is checked."""
        with pytest.raises(StudyFileError):
            study_service.read_table(io.StringIO("lambda,h,err\n-1,0.1,0.2\n"))

    def test_missing_file(self, study_service: StudyService, tmp_path: Path) -> None:
        """Test that unreadable files are reported as study file errors."""
        with pytest.raises(StudyFileError):
            study_service.read_table(tmp_path / "nothing.csv")
