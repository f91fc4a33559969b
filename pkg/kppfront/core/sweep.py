"""Batch speed computations over coefficient families.

Families:

* ``shigesada``: two-level habitats on grids of favourable fraction, contrast
  and period;
* ``mollified_comb``: the centred Dirac comb smeared at decreasing widths;
* ``fourier_random``: random truncated Fourier profiles, clipped, smoothed and
  renormalized to mean ``alpha``.

Rows are independent and come back in plan order whatever the worker count.
"""

from __future__ import annotations

import csv
import math
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.ndimage import gaussian_filter1d
from sqlalchemy.orm import Session

from kppfront.core.coeff import (
    Kernel,
    MollifierSpec,
    PeriodicCoefficient,
    cell_grid,
    describe,
    make_delta_comb,
    make_samples,
    make_shigesada,
    mollify,
    node_values,
)
from kppfront.core.eigen import SolverConfig
from kppfront.core.speed import (
    Direction,
    bounds,
    comb_speed,
    default_method,
    minimal_speed,
    mu_function,
)
from kppfront.exceptions import KPPFrontError
from kppfront.models.sweep_record import SweepRecord as SweepRecordRow
from kppfront.utils.logging import get_logger
from kppfront.utils.metrics import get_metrics_tracker

logger = get_logger(__name__)

GAP_TOL = 1e-6
BAND_TOL = 1e-3

CSV_COLUMNS = (
    "index",
    "family",
    "descriptor",
    "alpha",
    "period",
    "method",
    "c_star",
    "lambda_star",
    "mu_zero",
    "mu_star",
    "gap_to_h",
    "sup_deviation",
    "error",
)


class SweepPlan(BaseModel):
    """What to sweep and how."""

    model_config = ConfigDict(frozen=True)

    family: Literal["shigesada", "mollified_comb", "fourier_random"]
    alpha: float = Field(1.0, gt=0)
    period: float = Field(1.0, gt=0)
    method: Optional[Literal["fd", "evolution", "floquet"]] = None

    # shigesada
    fractions: Tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)
    contrasts: Tuple[Optional[float], ...] = (None,)
    periods: Optional[Tuple[float, ...]] = Field(
        None, description="Fragmentation scales; the plan period when omitted"
    )

    # mollified_comb
    eps_grid: Tuple[float, ...] = (0.4, 0.2, 0.1, 0.05, 0.025)
    kernel: Kernel = Kernel.TRIANGLE
    mollifier_samples: int = Field(1024, ge=16)

    # fourier_random
    seed: int = 0
    count: int = Field(200, ge=1)
    smoothness: float = Field(2.0, gt=0, description="Decay exponent s in |a_k| <= C/k^s")
    amplitude: float = Field(1.0, ge=0, description="C in |a_k| <= C/k^s")
    modes: int = Field(8, ge=1)
    samples: int = Field(256, ge=16)
    smoothing: float = Field(2.0, ge=0, description="Gaussian smoothing width in samples")

    output: Optional[Path] = None
    workers: int = Field(1, ge=1)

    @field_validator("fractions")
    @classmethod
    def check_fractions(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Fractions lie in (0, 1]."""
        if not v or any(not 0.0 < f <= 1.0 for f in v):
            raise ValueError("fractions must lie in (0, 1]")
        return v

    @field_validator("eps_grid")
    @classmethod
    def check_eps(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Widths are positive."""
        if not v or any(e <= 0 for e in v):
            raise ValueError("eps_grid must hold positive widths")
        return v


@dataclass(frozen=True)
class PlannedRow:
    """A generated coefficient awaiting its solve."""

    index: int
    family: str
    coefficient: PeriodicCoefficient
    params: Dict[str, Any]


@dataclass(frozen=True)
class SweepRecord:
    """Result of one sweep row; ``error`` is set when the solve failed.

    The μ curve is summarized by its two anchor values: ``mu_zero = μ(0)``, its
    minimum, and ``mu_star = μ(λ*)`` at the minimizing drift. Both are flat
    columns so the CSV and the database table stay one row per coefficient.
    """

    index: int
    family: str
    descriptor: str
    alpha: float
    period: float
    method: str
    c_star: float = math.nan
    lambda_star: float = math.nan
    mu_zero: float = math.nan
    mu_star: float = math.nan
    gap_to_h: float = math.nan
    sup_deviation: float = math.nan
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mu_curve_summary(self) -> Dict[str, float]:
        return {"mu_zero": self.mu_zero, "mu_star": self.mu_star}

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def fourier_profile(
    rng: np.random.Generator,
    alpha: float,
    period: float,
    samples: int,
    modes: int,
    amplitude: float,
    smoothness: float,
    smoothing: float,
) -> PeriodicCoefficient:
    """``α + Σ a_k cos + b_k sin`` with ``|a_k|, |b_k| <= C/k^s``, clipped at 0, smoothed, renormalized."""
    x = cell_grid(period, samples)
    values = np.full(samples, alpha, dtype=float)
    for k in range(1, modes + 1):
        bound = amplitude * alpha / k**smoothness
        a, c = rng.uniform(-bound, bound, size=2)
        phase = 2.0 * np.pi * k * x / period
        values += a * np.cos(phase) + c * np.sin(phase)
    values = np.clip(values, 0.0, None)
    if smoothing > 0:
        values = gaussian_filter1d(values, smoothing, mode="wrap")
    return make_samples(alpha, period, values)


def plan_rows(plan: SweepPlan) -> List[PlannedRow]:
    """Generate every coefficient of the plan; construction enforces the class invariants."""
    rows: List[PlannedRow] = []
    if plan.family == "shigesada":
        for period in plan.periods or (plan.period,):
            for fraction in plan.fractions:
                for contrast in plan.contrasts:
                    b = make_shigesada(plan.alpha, period, fraction, contrast)
                    params = {"fraction": fraction, "contrast": contrast, "period": period}
                    rows.append(PlannedRow(len(rows), plan.family, b, params))
    elif plan.family == "mollified_comb":
        comb = make_delta_comb(plan.alpha, plan.period)
        for eps in plan.eps_grid:
            b = mollify(comb, MollifierSpec(eps, plan.kernel), plan.mollifier_samples)
            rows.append(PlannedRow(len(rows), plan.family, b, {"eps": eps}))
    else:
        rng = np.random.default_rng(plan.seed)
        for i in range(plan.count):
            b = fourier_profile(
                rng,
                plan.alpha,
                plan.period,
                plan.samples,
                plan.modes,
                plan.amplitude,
                plan.smoothness,
                plan.smoothing,
            )
            rows.append(PlannedRow(i, plan.family, b, {"seed": plan.seed, "member": i}))
    logger.info("Sweep planned", family=plan.family, rows=len(rows))
    return rows


def sup_deviation(b: PeriodicCoefficient, n: int = 1024) -> float:
    """``‖b - α‖∞`` on an ``n``-point grid; infinite when atoms are present."""
    if b.has_atoms:
        return math.inf
    return float(np.max(np.abs(node_values(b, n) - b.alpha)))


def _label(row: PlannedRow) -> str:
    extra = ",".join(f"{k}={v}" for k, v in row.params.items())
    return f"{describe(row.coefficient)}[{extra}]"


def solve_row(row: PlannedRow, cfg: SolverConfig, method: Optional[str] = None) -> SweepRecord:
    """Minimal speed, ``μ(0)`` and gap to the comb for one row; failures are recorded."""
    b = row.coefficient
    method = method or default_method(b)
    base = {
        "index": row.index,
        "family": row.family,
        "descriptor": _label(row),
        "alpha": b.alpha,
        "period": b.period,
        "method": method,
        "sup_deviation": sup_deviation(b),
    }
    start = time.perf_counter()
    try:
        speed = minimal_speed(b, Direction.POSITIVE, cfg, method)
        mu_zero = mu_function(b, cfg, method)(0.0)
        gap = comb_speed(b.alpha, b.period, cfg) - speed.c_star
    except KPPFrontError as e:
        elapsed = time.perf_counter() - start
        logger.error("Sweep row failed", index=row.index, error=str(e), exc_info=True)
        get_metrics_tracker().record_sweep_row(False, elapsed)
        return SweepRecord(**base, wall_time=elapsed, error=f"{type(e).__name__}: {e}")
    elapsed = time.perf_counter() - start
    get_metrics_tracker().record_sweep_row(True, elapsed)
    return SweepRecord(
        **base,
        c_star=speed.c_star,
        lambda_star=speed.lambda_star,
        mu_zero=mu_zero,
        mu_star=speed.mu_at_star,
        gap_to_h=gap,
        wall_time=elapsed,
    )


@dataclass(frozen=True)
class SweepSummary:
    """Checks over a finished sweep."""

    rows: int
    failed: int
    gap_violations: Tuple[int, ...]
    band_violations: Tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not (self.failed or self.gap_violations or self.band_violations)


def summarize(records: Sequence[SweepRecord]) -> SweepSummary:
    """Count failures and rows breaking the comb ordering or the speed band."""
    gap_bad: List[int] = []
    band_bad: List[int] = []
    for r in records:
        if not r.ok:
            continue
        if r.gap_to_h < -GAP_TOL:
            gap_bad.append(r.index)
        low, high = bounds(r.alpha, r.period)
        if not low - BAND_TOL <= r.c_star <= high + BAND_TOL:
            band_bad.append(r.index)
    summary = SweepSummary(
        rows=len(records),
        failed=sum(1 for r in records if not r.ok),
        gap_violations=tuple(gap_bad),
        band_violations=tuple(band_bad),
    )
    if summary.ok:
        logger.info("Sweep checks passed", rows=summary.rows)
    else:
        logger.warning("Sweep checks failed", **asdict(summary))
    return summary


def run_sweep(
    plan: SweepPlan,
    cfg: Optional[SolverConfig] = None,
    session: Optional[Session] = None,
) -> List[SweepRecord]:
    """Solve every planned row; write CSV when ``plan.output`` is set and rows to ``session`` when given."""
    cfg = cfg or SolverConfig.from_settings()
    rows = plan_rows(plan)

    def _solve(row: PlannedRow) -> SweepRecord:
        return solve_row(row, cfg, plan.method)

    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_solve, rows))
    else:
        records = [_solve(row) for row in rows]

    summarize(records)
    if plan.family == "mollified_comb":
        _log_trend([r.c_star for r in records], "c_star")
    if plan.output is not None:
        write_csv(records, plan.output)
    if session is not None:
        store_records(records, session)
    return records


def _log_trend(values: Sequence[float], name: str) -> None:
    diffs = np.diff(np.asarray(values, dtype=float))
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    logger.info("Mollification trend", quantity=name, values=list(values), monotone=monotone)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(records: Iterable[SweepRecord], path: Union[str, Path]) -> Path:
    """Write records with the ``CSV_COLUMNS`` schema; wall time is left out so output is reproducible."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = r.to_dict()
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    logger.info("Sweep CSV written", path=str(out))
    return out


def store_records(records: Iterable[SweepRecord], session: Session, run_id: Optional[str] = None) -> str:
    """Persist records under one run id and commit."""
    run_id = run_id or uuid.uuid4().hex
    for r in records:
        session.add(
            SweepRecordRow(
                run_id=run_id,
                row_index=r.index,
                family=r.family,
                descriptor=r.descriptor,
                alpha=r.alpha,
                period=r.period,
                method=r.method,
                c_star=None if math.isnan(r.c_star) else r.c_star,
                lambda_star=None if math.isnan(r.lambda_star) else r.lambda_star,
                mu_zero=None if math.isnan(r.mu_zero) else r.mu_zero,
                mu_star=None if math.isnan(r.mu_star) else r.mu_star,
                gap_to_h=None if math.isnan(r.gap_to_h) else r.gap_to_h,
                wall_time=r.wall_time,
                error=r.error,
            )
        )
    session.commit()
    logger.info("Sweep records stored", run_id=run_id)
    return run_id


def write_scatter_svg(records: Sequence[SweepRecord], path: Union[str, Path]) -> Path:
    """Scatter of ``c*`` per row with the speed band and the comb speed."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    good = [r for r in records if r.ok]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.scatter([r.index for r in good], [r.c_star for r in good], s=12, label="c*")
    if good:
        low, high = bounds(good[0].alpha, good[0].period)
        ax.axhline(low, color="grey", linestyle=":", label="2√α")
        ax.axhline(high, color="grey", linestyle="--", label="2√(α+α²L²)")
        comb = [r.c_star + r.gap_to_h for r in good]
        ax.axhline(float(np.median(comb)), color="red", linewidth=0.8, label="c*(comb)")
    ax.set_xlabel("row")
    ax.set_ylabel("minimal speed")
    ax.legend(loc="best", fontsize="small")
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    """Minimal speed after mollifying at width ``eps``."""

    eps: float
    c_mollified: float
    gap: float
    c_negative: float = math.nan


def convergence_table(
    b: PeriodicCoefficient,
    eps_grid: Sequence[float],
    cfg: Optional[SolverConfig] = None,
    kernel: Kernel = Kernel.TRIANGLE,
    samples: int = 1024,
    check_symmetry: bool = False,
) -> List[ConvergenceRow]:
    """``(ε, c*(b_ε), c*(b) - c*(b_ε))`` for each width; trend is logged, not enforced.

    Raises:
        UnsupportedInputError: ``b`` has no atoms.
    """
    cfg = cfg or SolverConfig.from_settings()
    smoothed = [mollify(b, MollifierSpec(eps, kernel), samples) for eps in eps_grid]
    target = minimal_speed(b, Direction.POSITIVE, cfg).c_star
    table: List[ConvergenceRow] = []
    for eps, bm in zip(eps_grid, smoothed):
        c = minimal_speed(bm, Direction.POSITIVE, cfg).c_star
        c_neg = minimal_speed(bm, Direction.NEGATIVE, cfg).c_star if check_symmetry else math.nan
        table.append(ConvergenceRow(float(eps), c, target - c, c_neg))
        logger.info("Mollified speed", eps=eps, c_star=c, gap=target - c)
    _log_trend([r.gap for r in table], "gap")
    return table
