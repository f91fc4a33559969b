"""Spreading speeds fitted from simulated fronts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from kppfront.core.coeff import PeriodicCoefficient
from kppfront.core.eigen import SolverConfig
from kppfront.core.pde import (
    SimulationConfig,
    SimulationTrace,
    level_crossings,
    simulate,
)
from kppfront.core.speed import Direction, minimal_speed
from kppfront.exceptions import (
    InsufficientEdgeError,
    InvalidParameterError,
    NoisyFrontError,
)
from kppfront.utils.logging import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

JITTER_CELLS = 2.0
EDGE_LOW = 1e-8
EDGE_HIGH = 1e-3
MIN_EDGE_PERIODS = 3.0
EARLY_WINDOW = (0.4, 0.7)
LATE_WINDOW = (0.7, 1.0)


@dataclass(frozen=True)
class FrontFit:
    """Least-squares line through the front positions of one direction."""

    direction: str
    speed_estimate: float
    intercept: float
    fit_window: Tuple[float, float]
    residual_rms: float
    periodicity_defect: float
    error_bar: float = math.nan

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["fit_window"] = list(self.fit_window)
        return out


def front_positions(trace: SimulationTrace, theta: Optional[float] = None) -> FloatArray:
    """Rows ``(t, x⁺, x⁻)`` of the ``theta`` level set; the trace's own level by default."""
    if theta is None or theta == trace.theta:
        return np.array(trace.front_pos)
    if not 0.0 < theta < 1.0:
        raise InvalidParameterError(f"theta must lie in (0, 1), got {theta!r}")
    return np.array(
        [(t, *level_crossings(trace.x, s, theta)) for t, s in zip(trace.times, trace.snapshots)]
    )


def _signed_positions(trace: SimulationTrace, direction: Direction) -> Tuple[FloatArray, FloatArray]:
    fronts = trace.front_pos
    if direction is Direction.POSITIVE:
        return fronts[:, 0], fronts[:, 1]
    return fronts[:, 0], -fronts[:, 2]


def _line(trace: SimulationTrace, direction: Direction, t1: float, t2: float) -> Tuple[float, float, float]:
    t, pos = _signed_positions(trace, direction)
    mask = (t >= t1 - 1e-12) & (t <= t2 + 1e-12) & np.isfinite(pos)
    if np.count_nonzero(mask) < 3:
        raise InvalidParameterError(f"fewer than 3 front samples in [{t1}, {t2}]")
    tw, pw = t[mask], pos[mask]
    steps = np.diff(pw)
    if np.any(steps < -JITTER_CELLS * trace.dx):
        raise NoisyFrontError(
            f"front moved back by {-float(np.min(steps)):.3g} in [{t1}, {t2}] (tolerance {JITTER_CELLS} dx)"
        )
    slope, intercept = np.polyfit(tw, pw, 1)
    rms = float(np.sqrt(np.mean((pw - (slope * tw + intercept)) ** 2)))
    return float(slope), float(intercept), rms


def _check_clean(trace: SimulationTrace, t2: float) -> None:
    if trace.contaminated_at is not None and trace.contaminated_at <= t2:
        raise InvalidParameterError(
            f"trace reached the boundary at t={trace.contaminated_at}, inside the fit window"
        )


def error_bar(trace: SimulationTrace, direction: Direction = Direction.POSITIVE) -> float:
    """Half the spread between fits on ``[0.4, 0.7]`` and ``[0.7, 1.0]`` of the run."""
    direction = Direction(direction)
    t_end = float(trace.times[-1])
    _check_clean(trace, t_end)
    early, _, _ = _line(trace, direction, EARLY_WINDOW[0] * t_end, EARLY_WINDOW[1] * t_end)
    late, _, _ = _line(trace, direction, LATE_WINDOW[0] * t_end, LATE_WINDOW[1] * t_end)
    return 0.5 * abs(late - early)


def _snapshot_at(trace: SimulationTrace, t: float) -> FloatArray:
    """Linear interpolation in time between stored snapshots."""
    times = trace.times
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2)
    w = (t - times[k]) / (times[k + 1] - times[k])
    return (1.0 - w) * trace.snapshots[k] + w * trace.snapshots[k + 1]


def periodicity_defect(trace: SimulationTrace, direction: Direction, speed: float) -> float:
    """Sup over one period cell around the front of ``|u(x ∓ L, t) - u(x, t + T)|``, ``T = L/speed``."""
    direction = Direction(direction)
    if not speed > 0:
        return math.nan
    period_t = trace.period / speed
    times = trace.times
    candidates = np.flatnonzero(times + period_t <= times[-1] + 1e-12)
    if candidates.size == 0:
        return math.nan
    k = int(candidates[-1])
    m = int(round(trace.period / trace.dx))
    later = _snapshot_at(trace, float(times[k]) + period_t)
    earlier = trace.snapshots[k]
    moved = np.full_like(earlier, np.nan)
    if direction is Direction.POSITIVE:
        moved[m:] = earlier[:-m]
        centre = level_crossings(trace.x, later, trace.theta)[0]
    else:
        moved[:-m] = earlier[m:]
        centre = level_crossings(trace.x, later, trace.theta)[1]
    window = (np.abs(trace.x - centre) <= 0.5 * trace.period) & np.isfinite(moved)
    if not np.any(window):
        return math.nan
    return float(np.max(np.abs(moved[window] - later[window])))


def fit_front(
    trace: SimulationTrace,
    direction: Direction = Direction.POSITIVE,
    window_fraction: float = 0.5,
) -> FrontFit:
    """Fit ``x_front(t) ≈ c t + x₀`` on the last ``window_fraction`` of the run.

    Raises:
        NoisyFrontError: the front steps back by more than ``2 dx`` in the window.
        InvalidParameterError: the trace was contaminated inside the window.
    """
    if not 0.0 < window_fraction <= 1.0:
        raise InvalidParameterError("window_fraction must lie in (0, 1]")
    direction = Direction(direction)
    t_end = float(trace.times[-1])
    t1 = (1.0 - window_fraction) * t_end
    _check_clean(trace, t_end)
    speed, intercept, rms = _line(trace, direction, t1, t_end)
    if t_end - t1 < 5.0 * trace.period / speed:
        logger.warning("Fit window spans fewer than five period crossings", window=t_end - t1)
    if rms > 0.1 * trace.period:
        logger.warning("Front fit residual is large", residual_rms=rms)
    try:
        bar = error_bar(trace, direction)
    except (InvalidParameterError, NoisyFrontError) as e:
        logger.warning("Front error bar unavailable", error=str(e))
        bar = math.nan
    fit = FrontFit(
        direction=direction.value,
        speed_estimate=speed,
        intercept=intercept,
        fit_window=(t1, t_end),
        residual_rms=rms,
        periodicity_defect=periodicity_defect(trace, direction, speed),
        error_bar=bar,
    )
    logger.info("Front fitted", **fit.to_dict())
    return fit


def decay_rate_probe(
    trace: SimulationTrace,
    t: Optional[float] = None,
    direction: Direction = Direction.POSITIVE,
) -> float:
    """Exponential decay rate of the leading edge where ``1e-8 <= u <= 1e-3``.

    Raises:
        InsufficientEdgeError: that region spans fewer than three periods.
    """
    direction = Direction(direction)
    t = trace.clean_until() if t is None else t
    k = int(np.argmin(np.abs(trace.times - t)))
    u = trace.snapshots[k]
    x = trace.x
    right, left = level_crossings(x, u, trace.theta)
    if direction is Direction.POSITIVE:
        ahead = x > right
        sign = 1.0
    else:
        ahead = x < left
        sign = -1.0
    edge = ahead & (u >= EDGE_LOW) & (u <= EDGE_HIGH)
    if np.count_nonzero(edge) < 2:
        raise InsufficientEdgeError("leading edge not resolved between 1e-8 and 1e-3")
    xs = x[edge]
    span = float(xs.max() - xs.min())
    if span < MIN_EDGE_PERIODS * trace.period:
        raise InsufficientEdgeError(
            f"leading edge spans {span:.3g}, less than {MIN_EDGE_PERIODS} periods"
        )
    slope, _ = np.polyfit(sign * xs, np.log(u[edge]), 1)
    rate = -float(slope)
    logger.info("Leading-edge decay rate", rate=rate, t=float(trace.times[k]), span=span)
    return rate


@dataclass(frozen=True)
class SpreadReport:
    """Simulated against eigenvalue speed for one direction."""

    c_fit: float
    c_eigen: float
    rel_err: float
    lambda_edge: float
    lambda_star: float
    error_bar: float
    periodicity_defect: float
    direction: str

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def spread_report(
    b: PeriodicCoefficient,
    sim_cfg: Optional[SimulationConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    direction: Direction = Direction.POSITIVE,
    trace: Optional[SimulationTrace] = None,
) -> SpreadReport:
    """Simulate, fit the front, and compare with the minimal speed."""
    direction = Direction(direction)
    if trace is None:
        trace = simulate(b, None, sim_cfg or SimulationConfig.quick(b.period))
    fit = fit_front(trace, direction)
    speed = minimal_speed(b, direction, solver_cfg)
    try:
        lam_edge = decay_rate_probe(trace, direction=direction)
    except InsufficientEdgeError as e:
        logger.warning("Decay rate unavailable", error=str(e))
        lam_edge = math.nan
    report = SpreadReport(
        c_fit=fit.speed_estimate,
        c_eigen=speed.c_star,
        rel_err=(fit.speed_estimate - speed.c_star) / speed.c_star,
        lambda_edge=lam_edge,
        lambda_star=speed.lambda_star,
        error_bar=fit.error_bar,
        periodicity_defect=fit.periodicity_defect,
        direction=direction.value,
    )
    logger.info("Spread report", **report.to_dict())
    return report
