"""Integration tests for the slorder command-line tool."""

import json
from pathlib import Path

import pandas as pd
from click.testing import CliRunner, Result

from app.cli import cli
from app.services.analysis_service import AnalysisService
from app.services.study_service import StudyService


def _invoke(runner: CliRunner, service: AnalysisService, *args: str) -> Result:
    return runner.invoke(cli, list(args), obj={"analysis": service})


class TestTreesCommand:
    """Test suite for ``slorder trees``."""

    def test_csv_listing(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test one CSV line per tree plus the header."""
        result = _invoke(cli_runner, analysis_service, "trees", "--max-order", "5", "--format", "csv")

        assert result.exit_code == 0
        lines = result.stdout.strip().splitlines()
        assert lines[0] == "tree,order,slca,zeta"
        assert len(lines) == 18

    def test_slca_only(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the SLCA filter."""
        result = _invoke(cli_runner, analysis_service, "trees", "--slca-only", "--format", "csv")

        assert result.exit_code == 0
        assert len(result.stdout.strip().splitlines()) == 10

    def test_json_listing(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the JSON rows of order one."""
        result = _invoke(cli_runner, analysis_service, "trees", "--max-order", "1", "--format", "json")

        assert result.exit_code == 0
        assert json.loads(result.stdout) == [{"tree": "[]", "order": 1, "slca": True, "zeta": "1"}]

    def test_order_out_of_range(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the usage exit code."""
        result = _invoke(cli_runner, analysis_service, "trees", "--max-order", "11")

        assert result.exit_code == 2
        assert "outside supported range" in result.output


class TestAnalyzeCommand:
    """Test suite for ``slorder analyze``."""

    def test_backward_euler_json(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the JSON report of backward Euler."""
        result = _invoke(cli_runner, analysis_service, "analyze", "--catalog", "backward-euler", "--format", "json")

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["p_sl"] == 1
        assert data["predicted"]["q"] == 1
        assert data["stability"]["a_stable"] == "holds"

    def test_midpoint_table(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the table report of the implicit midpoint rule."""
        result = _invoke(cli_runner, analysis_service, "analyze", "--catalog", "implicit-midpoint")

        assert result.exit_code == 0
        assert "2 (superconvergence)" in result.stdout
        assert "semilinear order p_SL" in result.stdout

    def test_tableau_file(self, cli_runner: CliRunner, analysis_service: AnalysisService, tmp_path: Path) -> None:
        """Test analysis of a tableau file with the full tree check."""
        path = tmp_path / "trap.yaml"
        path.write_text('name: trap\nA: [[0, 0], ["1/2", "1/2"]]\nb: ["1/2", "1/2"]\n', encoding="utf-8")

        result = _invoke(
            cli_runner, analysis_service, "analyze", "--file", str(path), "--no-reduction", "--format", "json"
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["tableau"] == "trap"
        assert data["p_sl"] == data["p_sl_full"] == 2

    def test_missing_file(self, cli_runner: CliRunner, analysis_service: AnalysisService, tmp_path: Path) -> None:
        """Test that a missing file is a usage error naming the path."""
        result = _invoke(cli_runner, analysis_service, "analyze", "--file", str(tmp_path / "absent.yaml"))

        assert result.exit_code == 2
        assert "absent.yaml" in result.output

    def test_no_source(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that a tableau source is required."""
        result = _invoke(cli_runner, analysis_service, "analyze")

        assert result.exit_code == 2
        assert "exactly one tableau source" in result.output

    def test_require_order_gate(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the exit code of a failed order requirement."""
        result = _invoke(cli_runner, analysis_service, "analyze", "--catalog", "backward-euler", "--require-order", "2")

        assert result.exit_code == 1
        assert "below the required 2" in result.output


class TestStabilityCommand:
    """Test suite for ``slorder stability``."""

    def test_rk4_fails(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that the explicit method is reported as not A-stable."""
        result = _invoke(cli_runner, analysis_service, "stability", "--catalog", "classical-rk4")

        assert result.exit_code == 0
        assert "fails" in result.stdout
        assert "witness A" in result.stdout

    def test_probes(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the resolvent probes in JSON output."""
        result = _invoke(
            cli_runner, analysis_service, "stability", "--catalog", "gauss-2", "--probe-trials", "5", "--format", "json"
        )

        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["r_condition"] == "fails"
        assert len(data["probes"]) == 5
        assert all(probe["holds"] for probe in data["probes"])


class TestLteVerifyCommand:
    """Test suite for ``slorder lte-verify``."""

    def test_trapezoid(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that the expansions agree for the trapezoidal rule."""
        result = _invoke(
            cli_runner,
            analysis_service,
            "lte-verify",
            "--catalog",
            "trapezoid",
            "--problem",
            "npr-scalar",
            "--remainder-grid",
            "2^-3..2^-7",
        )

        assert result.exit_code == 0
        assert "abstract recursion: agrees" in result.stdout
        assert "remainder slope after 2 terms" in result.stdout

    def test_bad_lambdas(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that positive stiffness values are a usage error."""
        result = _invoke(cli_runner, analysis_service, "lte-verify", "--catalog", "trapezoid", "--lambdas", "1")

        assert result.exit_code == 2


class TestIntegrateCommand:
    """Test suite for ``slorder integrate``."""

    def test_trajectory_file(self, cli_runner: CliRunner, analysis_service: AnalysisService, tmp_path: Path) -> None:
        """Test the trajectory CSV of eight steps."""
        path = tmp_path / "trajectory.csv"

        result = _invoke(
            cli_runner, analysis_service, "integrate", "--catalog", "radau-iia-2", "--h", "0.125", "--output", str(path)
        )

        assert result.exit_code == 0
        assert "final error" in result.stdout
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["t", "y1", "newton"]
        assert len(frame) == 9

    def test_incommensurate_step(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the usage exit code for a step not dividing the interval."""
        result = _invoke(cli_runner, analysis_service, "integrate", "--catalog", "trapezoid", "--h", "0.3")

        assert result.exit_code == 2

    def test_newton_failure(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test the analysis-failure exit code of a failed step."""
        result = _invoke(
            cli_runner, analysis_service, "integrate", "--catalog", "backward-euler", "--h", "0.25", "--newton-max-iter", "1"
        )

        assert result.exit_code == 1
        assert "Step 0" in result.output


class TestConvergeCommand:
    """Test suite for ``slorder converge``."""

    def test_order_gate_passes(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that the trapezoidal rule reaches order two."""
        result = _invoke(
            cli_runner,
            analysis_service,
            "converge",
            "--catalog",
            "trapezoid",
            "--lambdas",
            "-1e2",
            "--h-grid",
            "2^-3..2^-10",
            "--require-order",
            "2",
        )

        assert result.exit_code == 0, result.output
        assert "observed order" in result.stdout

    def test_order_gate_fails(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that backward Euler misses order two on a stiff problem."""
        result = _invoke(
            cli_runner,
            analysis_service,
            "converge",
            "--catalog",
            "backward-euler",
            "--lambdas",
            "-1e6",
            "--h-grid",
            "2^-3..2^-8",
            "--require-order",
            "2",
        )

        assert result.exit_code == 1

    def test_bad_grid(self, cli_runner: CliRunner, analysis_service: AnalysisService) -> None:
        """Test that a malformed grid is a usage error."""
        result = _invoke(cli_runner, analysis_service, "converge", "--catalog", "trapezoid", "--h-grid", "empty")

        assert result.exit_code == 2
        assert "Invalid grid" in result.output

    def test_table_and_summary_files(
        self,
        cli_runner: CliRunner,
        analysis_service: AnalysisService,
        study_service: StudyService,
        tmp_path: Path,
    ) -> None:
        """Test that the written table reads back and the summary is JSON."""
        table = tmp_path / "study.csv"
        summary = tmp_path / "study.json"

        result = _invoke(
            cli_runner,
            analysis_service,
            "converge",
            "--catalog",
            "implicit-midpoint",
            "--lambdas",
            "-1,-1e2",
            "--h-grid",
            "2^-3..2^-6",
            "--jobs",
            "2",
            "--output",
            str(table),
            "--summary",
            str(summary),
            "--format",
            "csv",
        )

        assert result.exit_code == 0
        cells = study_service.read_table(table)
        assert len(cells) == 8
        assert json.loads(summary.read_text(encoding="utf-8"))["tableau"] == "implicit-midpoint"
        assert result.stdout.strip().splitlines()[0] == "lambda,h,error,newton_total"
