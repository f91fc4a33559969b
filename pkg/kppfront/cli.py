"""Command-line interface for kppfront."""

import csv
import functools
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar

import click
import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from kppfront import __version__
from kppfront.config.settings import get_settings
from kppfront.core.coeff import Kernel, PeriodicCoefficient
from kppfront.core.eigen import (
    SolverConfig,
    principal_eigenpair,
    principal_eigenpair_evolution,
    principal_eigenpair_fd,
    ratio_bound,
    sharp_ratio_bound,
)
from kppfront.core.floquet import dispersion_curve, floquet_eigenpair
from kppfront.core.front import spread_report
from kppfront.core.pde import (
    SimulationConfig,
    simulate as run_simulation,
    write_front_csv,
    write_heatmap_svg,
    write_snapshots,
)
from kppfront.core.speed import Direction, comb_speed, minimal_speed
from kppfront.core.sweep import (
    SweepPlan,
    convergence_table,
    run_sweep,
    summarize,
    write_scatter_svg,
)
from kppfront.exceptions import KPPFrontError
from kppfront.loader import load_coefficient, read_document
from kppfront.db import create_db_engine, get_db, init_db
from kppfront.utils.logging import configure_logging, get_logger
from kppfront.utils.metrics import log_metrics_summary

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])

METHODS = ["auto", "fd", "evolution", "floquet"]


def _echo_json(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, indent=2, default=_json_default))


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def handle_errors(func: F) -> F:
    """Turn library errors into a clean CLI failure."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (KPPFrontError, ValidationError) as e:
            logger.error("Command failed", error=str(e), kind=type(e).__name__)
            raise click.ClickException(f"{type(e).__name__}: {e}") from e

    return wrapper  # type: ignore[return-value]


def _solver_config(grid: Optional[int], **overrides: Any) -> SolverConfig:
    if grid is not None:
        overrides["grid_n"] = grid
    return SolverConfig.from_settings(**overrides)


def _method(value: str) -> Optional[str]:
    return None if value == "auto" else value


coefficient_argument = click.argument(
    "coefficient", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
grid_option = click.option("--grid", type=int, default=None, help="Grid points per period")


@click.group()
@click.version_option(version=__version__)
@click.option("--debug", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(ctx: click.Context, debug: bool) -> None:
    """kppfront - minimal speeds of periodic KPP fronts."""
    # Load environment variables
    load_dotenv()

    ctx.ensure_object(dict)
    settings = get_settings()
    ctx.obj["settings"] = settings

    if debug or settings.DEBUG:
        configure_logging("DEBUG")
        logger.debug("Debug logging enabled")

    if settings.METRICS_ENABLED:
        ctx.call_on_close(log_metrics_summary)


@cli.command()
@coefficient_argument
@click.option("--lambda", "lam", type=float, required=True, help="Drift parameter")
@click.option("--method", type=click.Choice(METHODS), default="auto", show_default=True)
@grid_option
@click.option("--time", "t", type=float, default=None, help="Evolution horizon t")
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), help="Write (x, psi) samples")
@handle_errors
def eigen(
    coefficient: Path,
    lam: float,
    method: str,
    grid: Optional[int],
    t: Optional[float],
    csv_path: Optional[Path],
) -> None:
    """Principal eigenvalue mu(lambda, b) and its eigenfunction."""
    b = load_coefficient(coefficient)
    cfg = _solver_config(grid)
    if method == "floquet" or (method == "auto" and b.is_exact):
        pair = floquet_eigenpair(b, lam, cfg.grid_n)
    elif method == "evolution":
        pair = principal_eigenpair_evolution(b, lam, t, cfg)
    elif method == "fd":
        pair = principal_eigenpair_fd(b, lam, cfg)
    else:
        pair = principal_eigenpair(b, lam, cfg)

    if csv_path is not None:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "psi"])
            for x, p in zip(pair.x, pair.psi):
                writer.writerow([repr(float(x)), repr(float(p))])

    payload = pair.to_dict()
    payload["ratio_bound"] = ratio_bound(b)
    payload["sharp_ratio_bound"] = sharp_ratio_bound(b, pair.mu)
    payload["ratio_bound_ok"] = pair.ratio <= payload["sharp_ratio_bound"] * (1.0 + 1e-3)
    _echo_json(payload)


@cli.command()
@coefficient_argument
@click.option("--lambda-min", type=float, default=0.0, show_default=True)
@click.option("--lambda-max", type=float, default=3.0, show_default=True)
@click.option("--points", type=int, default=31, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), help="CSV path (stdout when omitted)")
@click.pass_context
@handle_errors
def dispersion(
    ctx: click.Context,
    coefficient: Path,
    lambda_min: float,
    lambda_max: float,
    points: int,
    output: Optional[Path],
) -> None:
    """Dispersion curve mu(lambda) by transfer matrices, as CSV."""
    b = load_coefficient(coefficient)
    curve = dispersion_curve(
        b, np.linspace(lambda_min, lambda_max, points), ctx.obj["settings"].WORKERS
    )
    fh = output.open("w", newline="") if output else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "mu", "residual"])
        for row in curve.rows():
            writer.writerow([repr(v) for v in row])
    finally:
        if output:
            fh.close()
    if curve.failures:
        logger.warning("Dispersion points failed", count=len(curve.failures))


@cli.command()
@coefficient_argument
@click.option(
    "--direction",
    type=click.Choice(["positive", "negative", "both"]),
    default="positive",
    show_default=True,
)
@click.option("--method", type=click.Choice(METHODS), default="auto", show_default=True)
@grid_option
@handle_errors
def speed(coefficient: Path, direction: str, method: str, grid: Optional[int]) -> None:
    """Minimal speed c* = min over lambda of (lambda^2 - mu) / lambda."""
    b = load_coefficient(coefficient)
    cfg = _solver_config(grid)
    if direction != "both":
        _echo_json(minimal_speed(b, Direction(direction), cfg, _method(method)).to_dict())
        return
    pos = minimal_speed(b, Direction.POSITIVE, cfg, _method(method))
    neg = minimal_speed(b, Direction.NEGATIVE, cfg, _method(method))
    _echo_json(
        {
            "positive": pos.to_dict(),
            "negative": neg.to_dict(),
            "difference": abs(pos.c_star - neg.c_star),
        }
    )


def _simulation_config(
    b: PeriodicCoefficient, config: Optional[Path], preset: str, overrides: Dict[str, Any]
) -> SimulationConfig:
    values = {k: v for k, v in overrides.items() if v is not None}
    if config is not None:
        return SimulationConfig.model_validate({**read_document(config), **values})
    if preset == "reference":
        return SimulationConfig.reference(b.period, **values)
    if preset == "quick":
        return SimulationConfig.quick(b.period, **values)
    return SimulationConfig(**values)


def simulation_options(func: F) -> F:
    """Options shared by ``simulate`` and ``spread``."""
    options = [
        click.option("--config", type=click.Path(exists=True, path_type=Path), help="JSON/TOML SimulationConfig"),
        click.option("--preset", type=click.Choice(["default", "quick", "reference"]), default="default"),
        click.option("--t-end", type=float),
        click.option("--dx", type=float),
        click.option("--dt", type=float),
        click.option("--half-width", type=float),
        click.option("--scheme", type=click.Choice(["strang_cn", "duhamel"])),
        click.option("--boundary", type=click.Choice(["dirichlet_zero", "neumann"])),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@cli.command()
@coefficient_argument
@simulation_options
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), help="Front positions CSV")
@click.option("--snapshots", type=click.Path(path_type=Path), help="Binary snapshot dump (.npz)")
@click.option("--svg", type=click.Path(path_type=Path), help="Space-time heatmap")
@handle_errors
def simulate(
    coefficient: Path,
    config: Optional[Path],
    preset: str,
    csv_path: Optional[Path],
    snapshots: Optional[Path],
    svg: Optional[Path],
    **overrides: Any,
) -> None:
    """Simulate the Cauchy problem from the default bump."""
    b = load_coefficient(coefficient)
    cfg = _simulation_config(b, config, preset, overrides)
    trace = run_simulation(b, None, cfg)
    out_dir = Path(get_settings().OUTPUT_DIR)
    write_front_csv(trace, csv_path or out_dir / "fronts.csv")
    if snapshots:
        write_snapshots(trace, snapshots)
    if svg:
        write_heatmap_svg(trace, svg)
    _echo_json(
        {
            "steps": trace.steps,
            "t_end": float(trace.times[-1]),
            "contaminated": trace.contaminated,
            "x_plus": float(trace.front_pos[-1, 1]),
            "x_minus": float(trace.front_pos[-1, 2]),
            "sup_norm": float(trace.sup_norm[-1]),
        }
    )


@cli.command()
@coefficient_argument
@simulation_options
@click.option(
    "--direction", type=click.Choice(["positive", "negative"]), default="positive", show_default=True
)
@grid_option
@handle_errors
def spread(
    coefficient: Path,
    config: Optional[Path],
    preset: str,
    direction: str,
    grid: Optional[int],
    **overrides: Any,
) -> None:
    """Simulate, fit the front speed and compare with c*."""
    b = load_coefficient(coefficient)
    if preset == "default" and config is None:
        preset = "quick"
    cfg = _simulation_config(b, config, preset, overrides)
    report = spread_report(b, cfg, _solver_config(grid), Direction(direction))
    _echo_json(report.to_dict())


@cli.command()
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output", type=click.Path(path_type=Path), help="CSV path (overrides the plan)")
@click.option("--svg", type=click.Path(path_type=Path), help="Scatter plot of c*")
@click.option("--db", "use_db", is_flag=True, help="Also store rows in DATABASE_URL")
@grid_option
@handle_errors
def sweep(
    plan_file: Path, output: Optional[Path], svg: Optional[Path], use_db: bool, grid: Optional[int]
) -> None:
    """Run a sweep plan (JSON/TOML) and report the checks."""
    document = read_document(plan_file)
    if output is not None:
        document["output"] = str(output)
    plan = SweepPlan.model_validate(document)
    cfg = _solver_config(grid)
    if use_db:
        engine = create_db_engine()
        init_db(engine)
        sessions = get_db(engine)
        try:
            records = run_sweep(plan, cfg, next(sessions))
        finally:
            sessions.close()
    else:
        records = run_sweep(plan, cfg)
    if svg:
        write_scatter_svg(records, svg)
    summary = summarize(records)
    _echo_json(
        {
            "rows": summary.rows,
            "failed": summary.failed,
            "gap_violations": list(summary.gap_violations),
            "band_violations": list(summary.band_violations),
            "ok": summary.ok,
            "output": str(plan.output) if plan.output else None,
        }
    )


@cli.command("optimal-gap")
@coefficient_argument
@grid_option
@handle_errors
def optimal_gap(coefficient: Path, grid: Optional[int]) -> None:
    """Gap c*(comb) - c*(b) for the comb with the same alpha and L."""
    b = load_coefficient(coefficient)
    cfg = _solver_config(grid)
    c_b = minimal_speed(b, Direction.POSITIVE, cfg).c_star
    c_h = comb_speed(b.alpha, b.period, cfg)
    _echo_json({"c_star": c_b, "c_comb": c_h, "gap": c_h - c_b})


@cli.command()
@coefficient_argument
@click.option(
    "--eps",
    "eps_grid",
    type=float,
    multiple=True,
    default=(0.4, 0.2, 0.1, 0.05, 0.025),
    show_default=True,
)
@click.option("--kernel", type=click.Choice([k.value for k in Kernel]), default=Kernel.TRIANGLE.value)
@click.option("--symmetry", is_flag=True, help="Also compute the negative direction per row")
@grid_option
@handle_errors
def convergence(
    coefficient: Path, eps_grid: tuple, kernel: str, symmetry: bool, grid: Optional[int]
) -> None:
    """Mollification table (eps, c*(b_eps), gap) as CSV on stdout."""
    b = load_coefficient(coefficient)
    table = convergence_table(b, eps_grid, _solver_config(grid), Kernel(kernel), check_symmetry=symmetry)
    writer = csv.writer(sys.stdout)
    writer.writerow(["eps", "c_mollified", "gap", "c_negative"])
    for row in table:
        writer.writerow(
            [repr(row.eps), repr(row.c_mollified), repr(row.gap), "" if math.isnan(row.c_negative) else repr(row.c_negative)]
        )


def main() -> None:
    """Run the CLI application."""
    try:
        cli(obj={})
    except Exception as e:
        logger.critical("Fatal error", error=str(e), exc_info=True)
        raise click.Abort()


if __name__ == "__main__":
    main()
