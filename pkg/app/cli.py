"""Command-line front end: ``slorder analyze|trees|stability|lte-verify|integrate|converge``.

Exit codes: 0 success, 1 analysis failure (failed gate, failed cross-check, solver failure), 2 usage error.
"""

import functools
import json
from pathlib import Path
from typing import Any, Callable, Optional

import click
import numpy as np
import pandas as pd
from loguru import logger
from pydantic import TypeAdapter

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import EXIT_ANALYSIS_FAILURE, AppException
from app.logging import setup_logging
from app.models.enums import JacobianMode, OutputFormat, ProblemName
from app.models.schemas.analysis import AnalysisReport
from app.models.schemas.order import TreeRow
from app.models.schemas.solver import NewtonConfig
from app.models.schemas.study import ConvergenceStudy
from app.services.analysis_service import AnalysisService
from app.services.lte_service import LteService
from app.services.problem_service import ProblemService
from app.services.solver_service import SolverService
from app.services.study_service import parse_h_grid, parse_lambdas

FORMATS = click.Choice([f.value for f in OutputFormat])
PROBLEMS = click.Choice([p.value for p in ProblemName])


def handle_app_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Print library errors on stderr and exit with their exit code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except AppException as exc:
            logger.debug("Command failed", error=type(exc).__name__)
            click.echo(f"Error: {exc.detail}", err=True)
            raise click.exceptions.Exit(exc.exit_code) from exc

    return wrapper


def tableau_source(func: Callable[..., Any]) -> Callable[..., Any]:
    func = click.option("--file", "tableau_file", default=None, help="Tableau file (YAML or JSON).")(func)
    return click.option("--catalog", default=None, help="Catalog tableau name.")(func)


def output_format(func: Callable[..., Any]) -> Callable[..., Any]:
    return click.option("--format", "fmt", type=FORMATS, default=OutputFormat.TABLE.value, show_default=True)(func)


def _service(ctx: click.Context) -> AnalysisService:
    return ctx.obj["analysis"]


def _key_values(rows: list[tuple[str, Any]], fmt: str) -> str:
    if fmt == OutputFormat.CSV:
        return pd.DataFrame(rows, columns=["field", "value"]).to_csv(index=False).rstrip("\n")
    width = max(len(key) for key, _ in rows) + 2
    return "\n".join(f"{key + ':':<{width}}{value}" for key, value in rows)


def _analysis_rows(report: AnalysisReport) -> list[tuple[str, Any]]:
    stability = report.stability
    rows: list[tuple[str, Any]] = [
        ("tableau", report.tableau),
        ("mode", report.mode.value),
        ("structure", report.structure.value),
        ("stages", report.stages),
        ("stage order", report.stage_order),
        ("classical order", report.classical_order),
        ("weak stage order", report.weak_stage_order),
        ("semilinear order p_SL", report.p_sl),
    ]
    if report.p_sl_full is not None:
        rows.append(("p_SL without reduction", report.p_sl_full))
    failing = [row.tree for row in report.order.failing()]
    if failing:
        rows.append(("first failing trees", " ".join(failing[:5])))
    rows += [
        ("R(z)", stability.stability_function),
        ("R(infinity)", stability.r_at_infinity),
        ("stiffly accurate", stability.stiffly_accurate),
        ("A-stable", stability.a_stable.value),
        ("AS-stable", stability.as_stable.value),
        ("ASI-stable", stability.asi_stable.value),
        ("R-condition", stability.r_condition.value),
        ("DIRK shortcut", stability.dirk_shortcut),
        ("predicted q", f"{report.predicted.q} ({report.predicted.branch.value})"),
        ("branch", report.predicted.explanation),
    ]
    return rows


@click.group()
@click.option("--log-level", default="WARNING", show_default=True, help="Loguru level for stderr.")
@click.option("--log-dir", default=None, help="Also write rotating log files here.")
@click.pass_context
def cli(ctx: click.Context, log_level: str, log_dir: Optional[str]) -> None:
    """Semilinear order conditions, stability checks and stiff convergence studies."""
    setup_logging(log_level=log_level.upper(), log_dir=log_dir, app_name="slorder")
    ctx.ensure_object(dict)
    ctx.obj.setdefault("analysis", AnalysisService())


@cli.command()
@tableau_source
@click.option("--tol", type=float, default=ANALYSIS_DEFAULTS.tol, show_default=True)
@click.option("--max-order", type=int, default=ANALYSIS_DEFAULTS.max_order, show_default=True)
@click.option("--no-reduction", is_flag=True, help="Also check every tree and report p_SL both ways.")
@click.option("--require-order", type=int, default=None, help="Exit 1 unless p_SL reaches this value.")
@output_format
@click.pass_context
@handle_app_errors
def analyze(
    ctx: click.Context,
    catalog: Optional[str],
    tableau_file: Optional[str],
    tol: float,
    max_order: int,
    no_reduction: bool,
    require_order: Optional[int],
    fmt: str,
) -> None:
    """Orders, stability verdicts and predicted global order of a tableau."""
    service = _service(ctx)
    tableau = service.resolve_tableau(catalog, tableau_file)
    report = service.analyze(tableau, max_order=max_order, tol=tol, compare_full=no_reduction)
    if fmt == OutputFormat.JSON:
        click.echo(report.model_dump_json(indent=2))
    else:
        click.echo(_key_values(_analysis_rows(report), fmt))
    if require_order is not None and report.p_sl < require_order:
        click.echo(f"Semilinear order {report.p_sl} is below the required {require_order}", err=True)
        ctx.exit(EXIT_ANALYSIS_FAILURE)


@cli.command()
@click.option("--max-order", type=int, default=5, show_default=True)
@click.option("--slca-only", is_flag=True, help="Only semi-lone-child-avoiding trees.")
@output_format
@click.pass_context
@handle_app_errors
def trees(ctx: click.Context, max_order: int, slca_only: bool, fmt: str) -> None:
    """List rooted trees with encodings, SLCA flags and combinatorial factors."""
    rows = _service(ctx).tree_listing(max_order, slca_only)
    if fmt == OutputFormat.JSON:
        click.echo(TypeAdapter(list[TreeRow]).dump_json(rows, indent=2).decode())
        return
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=["tree", "order", "slca", "zeta"])
    click.echo(frame.to_csv(index=False).rstrip("\n") if fmt == OutputFormat.CSV else frame.to_string(index=False))


@cli.command()
@tableau_source
@click.option("--probe-trials", type=int, default=0, show_default=True, help="Random dissipative Z resolvent probes.")
@click.option("--seed", type=int, default=0, show_default=True)
@output_format
@click.pass_context
@handle_app_errors
def stability(
    ctx: click.Context, catalog: Optional[str], tableau_file: Optional[str], probe_trials: int, seed: int, fmt: str
) -> None:
    """Stability function, A/AS/ASI verdicts with witnesses and the R-condition."""
    service = _service(ctx)
    tableau = service.resolve_tableau(catalog, tableau_file)
    report = service.stability_service.report(tableau)
    rng = np.random.default_rng(seed)
    probes = [
        service.stability_service.nevanlinna_probe(
            tableau, service.stability_service.random_dissipative(int(rng.integers(1, 6)), rng)
        )
        for _ in range(probe_trials)
    ]
    if fmt == OutputFormat.JSON:
        payload = report.model_dump(mode="json")
        payload["probes"] = [probe.model_dump() for probe in probes]
        click.echo(json.dumps(payload, indent=2))
        return
    rows: list[tuple[str, Any]] = [
        ("tableau", report.tableau),
        ("R(z)", report.stability_function),
        ("R(infinity)", report.r_at_infinity),
        ("A-stable", report.a_stable.value),
        ("AS-stable", report.as_stable.value),
        ("ASI-stable", report.asi_stable.value),
        ("R-condition", report.r_condition.value),
        ("sup |R| on iR", report.a_boundary_max),
        ("sup ||(I - zA)^-1||", report.asi_sup),
        ("sup ||z b^T (I - zA)^-1||", report.as_sup),
        ("stiffly accurate", report.stiffly_accurate),
        ("DIRK shortcut", report.dirk_shortcut),
    ]
    rows += [(f"witness {name}", witness.describe()) for name, witness in report.witnesses.items()]
    if probes:
        rows.append(("resolvent probes holding", f"{sum(p.holds for p in probes)}/{len(probes)}"))
    click.echo(_key_values(rows, fmt))


@cli.command("lte-verify")
@tableau_source
@click.option("--problem", type=PROBLEMS, default=ProblemName.NPR_2D.value, show_default=True)
@click.option("--lambdas", default="-1,-1e3,-1e6", show_default=True)
@click.option("--h", "h", type=float, default=1e-2, show_default=True)
@click.option("--max-order", type=int, default=4, show_default=True)
@click.option("--t0", type=float, default=0.5, show_default=True)
@click.option("--remainder-grid", default=None, help="Also fit the one-step remainder, e.g. 2^-3..2^-7.")
@output_format
@click.pass_context
@handle_app_errors
def lte_verify(
    ctx: click.Context,
    catalog: Optional[str],
    tableau_file: Optional[str],
    problem: str,
    lambdas: str,
    h: float,
    max_order: int,
    t0: float,
    remainder_grid: Optional[str],
    fmt: str,
) -> None:
    """Cross-check the tree expansion, the direct recursion, the closed form and the abstract recursion."""
    service = _service(ctx)
    tableau = service.resolve_tableau(catalog, tableau_file)
    hs = parse_h_grid(remainder_grid, 0.0, 1.0) if remainder_grid else None
    lte = LteService(condition_service=service.condition_service)
    result = lte.verify(tableau, problem, parse_lambdas(lambdas), h=h, max_order=max_order, t0=t0, remainder_hs=hs)
    if fmt == OutputFormat.JSON:
        click.echo(result.model_dump_json(indent=2))
    else:
        frame = pd.DataFrame([check.model_dump() for check in result.checks])
        click.echo(frame.to_csv(index=False).rstrip("\n") if fmt == OutputFormat.CSV else frame.to_string(index=False))
        if fmt == OutputFormat.TABLE:
            click.echo(f"p_SL: {result.p_sl}")
            click.echo(f"abstract recursion: {'agrees' if result.abstract_recursion_ok else 'DISAGREES'}")
            if result.remainder is not None:
                click.echo(f"remainder slope after {result.remainder.order} terms: {result.remainder.slope:.3f}")
    if not result.ok:
        ctx.exit(EXIT_ANALYSIS_FAILURE)


def newton_options(func: Callable[..., Any]) -> Callable[..., Any]:
    func = click.option(
        "--jacobian", type=click.Choice([m.value for m in JacobianMode]), default=JacobianMode.ANALYTIC.value
    )(func)
    return click.option("--newton-max-iter", type=int, default=ANALYSIS_DEFAULTS.newton_max_iter)(func)


@cli.command()
@tableau_source
@click.option("--problem", type=PROBLEMS, default=ProblemName.NPR_SCALAR.value, show_default=True)
@click.option("--lambda", "stiffness", type=float, default=-1e2, show_default=True)
@click.option("--h", "h", type=float, required=True)
@click.option("--t0", type=float, default=ANALYSIS_DEFAULTS.t0, show_default=True)
@click.option("--tf", type=float, default=ANALYSIS_DEFAULTS.tf, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None, help="Trajectory CSV.")
@newton_options
@output_format
@click.pass_context
@handle_app_errors
def integrate(
    ctx: click.Context,
    catalog: Optional[str],
    tableau_file: Optional[str],
    problem: str,
    stiffness: float,
    h: float,
    t0: float,
    tf: float,
    output: Optional[str],
    newton_max_iter: int,
    jacobian: str,
    fmt: str,
) -> None:
    """Integrate a builtin problem with constant steps and report the final error."""
    service = _service(ctx)
    tableau = service.resolve_tableau(catalog, tableau_file)
    semilinear = ProblemService().builtin_problem(problem, stiffness)
    cfg = NewtonConfig(max_iter=newton_max_iter, jacobian=JacobianMode(jacobian))
    trajectory = SolverService(service.stability_service).integrate(tableau, semilinear, t0, tf, h, cfg)
    frame = pd.DataFrame(trajectory.rows(), columns=trajectory.header())
    if output:
        frame.to_csv(output, index=False)
    error = float(np.linalg.norm(semilinear.exact(float(trajectory.times[-1])) - trajectory.final))
    error /= np.sqrt(semilinear.N)
    if fmt == OutputFormat.CSV and not output:
        click.echo(frame.to_csv(index=False).rstrip("\n"))
    elif fmt == OutputFormat.JSON:
        summary = {
            "steps": len(trajectory.times) - 1,
            "final_error": error,
            "newton_total": sum(trajectory.newton_iterations),
        }
        click.echo(json.dumps(summary, indent=2))
    else:
        click.echo(
            _key_values(
                [
                    ("tableau", tableau.name),
                    ("problem", f"{problem} (lambda = {stiffness:g}, N = {semilinear.N})"),
                    ("steps", len(trajectory.times) - 1),
                    ("final error", f"{error:.6e}"),
                    ("newton iterations", sum(trajectory.newton_iterations)),
                ],
                OutputFormat.TABLE,
            )
        )


def _study_summary(study: ConvergenceStudy) -> list[tuple[str, Any]]:
    rows: list[tuple[str, Any]] = [("tableau", study.tableau), ("problem", study.problem)]
    if study.predicted is not None:
        rows += [
            ("predicted q", f"{study.predicted.q} ({study.predicted.branch.value})"),
            ("branch", study.predicted.explanation),
        ]
    rows += [(f"stability {name}", verdict.value) for name, verdict in study.stability.items()]
    for entry in study.fits:
        if entry.fit is not None:
            value = f"{entry.fit.slope:.3f} (fit residual {entry.fit.fit_residual:.2e}, {entry.fit.used_points} points)"
        else:
            value = f"no fit: {entry.failure}"
        rows.append((f"observed order, lambda = {entry.stiffness:g}", value))
    if study.uniformity is not None:
        if study.uniformity.growth is not None:
            rows.append(("uniformity growth max C / C(least stiff)", f"{study.uniformity.growth:.3g}"))
        if study.uniformity.ratio is not None:
            rows.append(("constant spread max/min C", f"{study.uniformity.ratio:.3g}"))
    if study.failures():
        rows.append(("failed cells", len(study.failures())))
    return rows


@cli.command()
@tableau_source
@click.option("--problem", type=PROBLEMS, default=ProblemName.NPR_SCALAR.value, show_default=True)
@click.option("--lambdas", default=",".join(f"{lam:g}" for lam in ANALYSIS_DEFAULTS.lambdas), show_default=True)
@click.option("--h-grid", default=None, help="2^-3..2^-12 (default) or a comma-separated list.")
@click.option("--t0", type=float, default=ANALYSIS_DEFAULTS.t0, show_default=True)
@click.option("--tf", type=float, default=ANALYSIS_DEFAULTS.tf, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=ANALYSIS_DEFAULTS.jobs, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None, help="Study table CSV.")
@click.option("--summary", type=click.Path(dir_okay=False, writable=True), default=None, help="Study JSON.")
@click.option("--require-order", type=float, default=None, help="Exit 1 unless every fitted order >= x - 0.2.")
@output_format
@click.pass_context
@handle_app_errors
def converge(
    ctx: click.Context,
    catalog: Optional[str],
    tableau_file: Optional[str],
    problem: str,
    lambdas: str,
    h_grid: Optional[str],
    t0: float,
    tf: float,
    jobs: int,
    output: Optional[str],
    summary: Optional[str],
    require_order: Optional[float],
    fmt: str,
) -> None:
    """Convergence study over an (h, lambda) grid with observed and predicted orders."""
    hs = parse_h_grid(h_grid, t0, tf) if h_grid is not None else None
    stiffness = parse_lambdas(lambdas)
    service = _service(ctx)
    tableau = service.resolve_tableau(catalog, tableau_file)
    study = service.study_service.run_study(tableau, problem, hs=hs, lambdas=stiffness, t0=t0, tf=tf, jobs=jobs)

    if output:
        service.study_service.write_table(study, output)
    if summary:
        Path(summary).write_text(study.model_dump_json(indent=2), encoding="utf-8")
    if fmt == OutputFormat.CSV:
        click.echo(service.study_service.table_text(study).rstrip("\n"))
    elif fmt == OutputFormat.JSON:
        click.echo(study.model_dump_json(indent=2))
    else:
        click.echo(service.study_service.to_frame(study).to_string(index=False))
        click.echo(_key_values(_study_summary(study), OutputFormat.TABLE))

    if require_order is not None:
        slopes = [entry.fit.slope if entry.fit is not None else None for entry in study.fits]
        threshold = require_order - ANALYSIS_DEFAULTS.order_gate_slack
        if any(slope is None or slope < threshold for slope in slopes):
            click.echo(f"Observed order below {threshold:g} for at least one lambda", err=True)
            ctx.exit(EXIT_ANALYSIS_FAILURE)


if __name__ == "__main__":
    cli()
