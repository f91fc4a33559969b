"""Minimal pulsating-wave speeds ``c* = min_{λ>0} (λ² - μ(±λ)) / λ``.

The speed profile is scanned on a geometric λ grid, then refined by
golden-section search on the triple around the scan minimum. No derivative of
``μ(λ)`` is used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from kppfront.core.coeff import PeriodicCoefficient, make_delta_comb
from kppfront.core.eigen import (
    SolverConfig,
    principal_eigenpair,
    principal_eigenpair_evolution,
    upper_rate,
)
from kppfront.core.floquet import dispersion_mu
from kppfront.exceptions import BracketEscapeError, InvalidParameterError, UnsupportedInputError
from kppfront.utils.logging import get_logger

logger = get_logger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
SYMMETRY_TOL = 1e-6


class Direction(str, Enum):
    """Propagation direction."""

    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.POSITIVE else -1.0


@dataclass(frozen=True)
class SpeedResult:
    """A refined minimum of the speed profile."""

    c_star: float
    lambda_star: float
    direction: str
    mu_at_star: float
    bracket: Tuple[float, float]
    method: str
    tolerance_achieved: float

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["bracket"] = list(self.bracket)
        return out


def bounds(alpha: float, period: float) -> Tuple[float, float]:
    """``(2√α, 2√(α + α²L²))``, the band holding every minimal speed."""
    if not (alpha > 0 and period > 0):
        raise InvalidParameterError("alpha and period must be positive")
    return 2.0 * math.sqrt(alpha), 2.0 * math.sqrt(alpha + (alpha * period) ** 2)


def default_method(b: PeriodicCoefficient) -> str:
    """Transfer matrices when the coefficient allows them, finite differences otherwise."""
    return "floquet" if b.is_exact else "fd"


def mu_function(
    b: PeriodicCoefficient, cfg: SolverConfig, method: Optional[str] = None
) -> Callable[[float], float]:
    """``λ -> μ(λ, b)`` for the chosen solver."""
    method = method or default_method(b)
    if method == "floquet":
        if not b.is_exact:
            raise UnsupportedInputError("floquet method needs an exact coefficient")
        return lambda lam: dispersion_mu(b, lam)
    if method == "fd":
        return lambda lam: principal_eigenpair(b, lam, cfg).mu
    if method == "evolution":
        return lambda lam: principal_eigenpair_evolution(b, lam, cfg=cfg).mu
    raise InvalidParameterError(f"unknown method {method!r}")


def speed_function(
    b: PeriodicCoefficient,
    lam: float,
    direction: Direction = Direction.POSITIVE,
    cfg: Optional[SolverConfig] = None,
    method: Optional[str] = None,
) -> float:
    """``φ(λ) = (λ² - μ(±λ)) / λ`` for ``λ > 0``."""
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
    cfg = cfg or SolverConfig.from_settings()
    mu = mu_function(b, cfg, method)(Direction(direction).sign * lam)
    return (lam * lam - mu) / lam


def golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float
) -> Tuple[float, float, Tuple[float, float]]:
    """Golden-section minimization on ``[a, b]`` down to width ``tol``.

    Returns the midpoint of the final bracket, ``f`` there, and the bracket.
    """
    c = b - (b - a) / GOLDEN
    d = a + (b - a) / GOLDEN
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) / GOLDEN
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) / GOLDEN
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x), (a, b)


def _local_minima(values: Sequence[float]) -> List[int]:
    return [
        i
        for i in range(1, len(values) - 1)
        if values[i] < values[i - 1] and values[i] <= values[i + 1]
    ]


def minimal_speed(
    b: PeriodicCoefficient,
    direction: Direction = Direction.POSITIVE,
    cfg: Optional[SolverConfig] = None,
    method: Optional[str] = None,
) -> SpeedResult:
    """Minimize the speed profile over ``[0.5√α, 2√(α + α²L²)]``.

    Ties in the scan go to the smallest λ.

    Raises:
        BracketEscapeError: the scan minimum sits on the edge of the grid.
    """
    cfg = cfg or SolverConfig.from_settings()
    direction = Direction(direction)
    method = method or default_method(b)
    mu_of = mu_function(b, cfg, method)
    cache: Dict[float, float] = {}

    def mu_at(lam: float) -> float:
        if lam not in cache:
            cache[lam] = mu_of(direction.sign * lam)
        return cache[lam]

    def phi(lam: float) -> float:
        return (lam * lam - mu_at(lam)) / lam

    lo = 0.5 * math.sqrt(b.alpha)
    hi = 2.0 * math.sqrt(upper_rate(b))
    grid = np.geomspace(lo, hi, cfg.scan_points)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            mus = list(pool.map(lambda lam: mu_of(direction.sign * lam), grid.tolist()))
        cache.update(zip(grid.tolist(), mus))
    values = [phi(lam) for lam in grid.tolist()]
    k = int(np.argmin(values))
    diagnostics = {
        "lambdas": grid.tolist(),
        "phi": values,
        "argmin": k,
        "direction": direction.value,
    }
    if k == 0 or k == len(values) - 1:
        raise BracketEscapeError(
            f"speed profile minimum at the scan edge lambda={grid[k]:.6g}", diagnostics
        )
    minima = _local_minima(values)
    if len(minima) > 1:
        logger.warning(
            "Speed profile is not unimodal",
            direction=direction.value,
            minima=[float(grid[i]) for i in minima],
        )

    lam_star, c_star, bracket = golden_section(phi, float(grid[k - 1]), float(grid[k + 1]), cfg.lambda_tol)
    if values[k] < c_star:
        lam_star, c_star = float(grid[k]), values[k]
    result = SpeedResult(
        c_star=c_star,
        lambda_star=lam_star,
        direction=direction.value,
        mu_at_star=mu_at(lam_star),
        bracket=(float(bracket[0]), float(bracket[1])),
        method=method,
        tolerance_achieved=float(bracket[1] - bracket[0]),
    )
    low, high = bounds(b.alpha, b.period)
    if not (low - 1e-6 <= c_star <= high + 1e-6):
        logger.warning("Minimal speed outside the theoretical band", c_star=c_star, low=low, high=high)
    logger.info(
        "Minimal speed computed",
        c_star=c_star,
        lambda_star=lam_star,
        direction=direction.value,
        method=method,
        evaluations=len(cache),
    )
    return result


@lru_cache(maxsize=64)
def comb_speed(alpha: float, period: float, cfg: SolverConfig) -> float:
    """``c*(h)`` for the centred Dirac comb of mass ``αL``."""
    return minimal_speed(make_delta_comb(alpha, period), Direction.POSITIVE, cfg).c_star


def speed_gap_to_optimum(
    b: PeriodicCoefficient,
    cfg: Optional[SolverConfig] = None,
    method: Optional[str] = None,
) -> float:
    """``c*(h) - c*(b)`` for the comb with the same ``(α, L)``."""
    cfg = cfg or SolverConfig.from_settings()
    gap = comb_speed(b.alpha, b.period, cfg) - minimal_speed(b, Direction.POSITIVE, cfg, method).c_star
    logger.info("Gap to the comb speed", gap=gap)
    return gap


def direction_symmetry_check(
    b: PeriodicCoefficient,
    cfg: Optional[SolverConfig] = None,
    method: Optional[str] = None,
) -> Tuple[float, float]:
    """Independent minimal speeds in both directions."""
    cfg = cfg or SolverConfig.from_settings()
    c_pos = minimal_speed(b, Direction.POSITIVE, cfg, method).c_star
    c_neg = minimal_speed(b, Direction.NEGATIVE, cfg, method).c_star
    if abs(c_pos - c_neg) > SYMMETRY_TOL:
        logger.warning("Direction speeds differ", c_pos=c_pos, c_neg=c_neg)
    return c_pos, c_neg


def speed_by_root_scan(
    b: PeriodicCoefficient,
    c_grid: ArrayLike,
    lambda_grid: ArrayLike,
    cfg: Optional[SolverConfig] = None,
    method: Optional[str] = None,
) -> float:
    """Smallest ``c`` on ``c_grid`` for which ``λ² - λc - μ(λ)`` reaches zero on ``lambda_grid``."""
    cfg = cfg or SolverConfig.from_settings()
    lams = np.asarray(lambda_grid, dtype=float)
    cs = np.sort(np.asarray(c_grid, dtype=float))
    if np.any(lams <= 0):
        raise InvalidParameterError("lambda grid must be positive")
    mu_of = mu_function(b, cfg, method)
    mus = np.array([mu_of(lam) for lam in lams.tolist()])
    for c in cs:
        if np.min(lams * lams - lams * c - mus) <= 0:
            return float(c)
    raise InvalidParameterError("no speed on the grid satisfies the dispersion relation")
