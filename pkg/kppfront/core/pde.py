"""Cauchy problem ``u_t = u_xx + b(x) u (1 - u)`` on a truncated line.

The line is cut to ``[-X, X]`` with ``X`` a multiple of the period, sampled
with ``L/dx`` nodes per cell so that the coefficient tiles exactly. Two
schemes are available:

``strang_cn``
    half Crank-Nicolson diffusion, exact logistic reaction, half
    Crank-Nicolson diffusion. Range preserving while ``dt <= 2 dx²``.
``duhamel``
    one explicit reaction increment convolved with the sampled heat kernel.
    Range preserving while ``dt · max b <= 1``. First order; kept for
    cross-checks at coarse resolution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import convolve1d
from scipy.sparse.linalg import splu

from kppfront.core.coeff import PeriodicCoefficient, node_values
from kppfront.exceptions import (
    InvalidParameterError,
    SchemeViolationError,
    StabilityError,
)
from kppfront.utils.logging import get_logger
from kppfront.utils.metrics import get_metrics_tracker

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

UNDERSHOOT_TOL = 1e-12
OVERSHOOT_TOL = 1e-10
CONTAMINATION_LEVEL = 1e-8
MIN_NODES_PER_CELL = 16
MIN_HALF_WIDTH_CELLS = 20
KERNEL_EXPONENT = 40.0

Boundary = Literal["dirichlet_zero", "neumann"]


class SimulationConfig(BaseModel):
    """Domain, resolution and scheme of one simulation."""

    model_config = ConfigDict(frozen=True)

    half_width: float = Field(40.0, description="X; the domain is [-X, X]")
    dx: float = Field(1.0 / 32.0)
    dt: float = Field(1e-3)
    t_end: float = Field(20.0)
    scheme: Literal["strang_cn", "duhamel"] = Field("strang_cn")
    boundary: Boundary = Field("dirichlet_zero")
    snapshot_every: float = Field(0.1, description="Snapshot cadence in time units")
    theta: float = Field(0.5, description="Level used for front positions")
    atom_mode: Literal["lump", "split"] = Field("lump")

    @model_validator(mode="after")
    def check_positive(self) -> "SimulationConfig":
        """Every length and time must be positive."""
        for name in ("half_width", "dx", "dt", "t_end", "snapshot_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        return self

    @classmethod
    def reference(cls, period: float = 1.0, **overrides: Any) -> "SimulationConfig":
        """Long run (``dx = L/64``, ``t_end = 60``) for comparing fitted and eigenvalue speeds."""
        return cls._long(period, 64, overrides)

    @classmethod
    def quick(cls, period: float = 1.0, **overrides: Any) -> "SimulationConfig":
        """Same horizon as :meth:`reference` at ``dx = L/32``."""
        return cls._long(period, 32, overrides)

    @classmethod
    def _long(cls, period: float, per_cell: int, overrides: Dict[str, Any]) -> "SimulationConfig":
        dx = period / per_cell
        values: Dict[str, Any] = {
            "half_width": 160.0 * period,
            "dx": dx,
            "dt": 2.0 * dx * dx,
            "t_end": 60.0,
            "snapshot_every": 0.25,
        }
        values.update(overrides)
        return cls(**values)

    def validate_for(self, b: PeriodicCoefficient) -> "SpatialGrid":
        """Check the domain against the period and return the grid."""
        if self.half_width < MIN_HALF_WIDTH_CELLS * b.period - 1e-9:
            raise InvalidParameterError(
                f"half width {self.half_width} must be at least {MIN_HALF_WIDTH_CELLS} periods"
            )
        return spatial_grid(b, self.half_width, self.dx)


@dataclass(frozen=True)
class SpatialGrid:
    """Nodes ``-X + i dx``, ``i = 0 .. 2X/dx``."""

    half_width: float
    dx: float
    period: float

    @property
    def cell_nodes(self) -> int:
        return int(round(self.period / self.dx))

    @property
    def n(self) -> int:
        return int(round(2.0 * self.half_width / self.dx)) + 1

    @property
    def x(self) -> FloatArray:
        return -self.half_width + np.arange(self.n) * self.dx


def _whole(value: float, name: str) -> int:
    k = int(round(value))
    if k < 1 or abs(value - k) > 1e-9 * max(1.0, value):
        raise InvalidParameterError(f"{name} must be a whole number, got {value!r}")
    return k


def spatial_grid(b: PeriodicCoefficient, half_width: float, dx: float) -> SpatialGrid:
    """Grid on ``[-X, X]`` aligned with the period of ``b``."""
    _whole(half_width / b.period, "half_width / L")
    per_cell = _whole(b.period / dx, "L / dx")
    if per_cell < MIN_NODES_PER_CELL:
        raise InvalidParameterError(f"need at least {MIN_NODES_PER_CELL} nodes per period")
    return SpatialGrid(float(half_width), b.period / per_cell, b.period)


def rates_on_grid(b: PeriodicCoefficient, grid: SpatialGrid, atom_mode: str = "lump") -> FloatArray:
    """Coefficient values at every node, tiled from one cell."""
    cell = node_values(b, grid.cell_nodes, atom_mode)
    return cell[np.arange(grid.n) % grid.cell_nodes]


def logistic_flow(u: FloatArray, growth: FloatArray) -> FloatArray:
    """Exact solution of ``u' = r u (1 - u)`` after time ``dt``; ``growth = expm1(r dt)``."""
    return u * (1.0 + growth) / (1.0 + u * growth)


def laplacian(n: int, dx: float, boundary: str) -> sp.csr_matrix:
    """Second difference on ``n`` nodes; Neumann uses a reflected ghost node."""
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    if boundary == "neumann":
        upper[0] = 2.0
        lower[-1] = 2.0
    elif boundary != "dirichlet_zero":
        raise InvalidParameterError(f"unknown boundary {boundary!r}")
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / (dx * dx)


class StrangStepper:
    """Strang step with prefactored Crank-Nicolson half steps."""

    def __init__(self, rates: FloatArray, dx: float, dt: float, boundary: str) -> None:
        if dt > 2.0 * dx * dx * (1.0 + 1e-12):
            raise StabilityError(
                f"Crank-Nicolson half step loses positivity: dt={dt} > 2 dx^2={2 * dx * dx}"
            )
        n = rates.size
        half = 0.25 * dt
        lap = laplacian(n, dx, boundary)
        eye = sp.identity(n, format="csr")
        explicit = (eye + half * lap).tolil()
        implicit = (eye - half * lap).tolil()
        if boundary == "dirichlet_zero":
            for row in (0, n - 1):
                explicit.rows[row], explicit.data[row] = [], []
                implicit.rows[row], implicit.data[row] = [row], [1.0]
        self._explicit = explicit.tocsr()
        self._lu = splu(implicit.tocsc())
        self._growth = np.expm1(rates * dt)

    def diffuse(self, u: FloatArray) -> FloatArray:
        return self._lu.solve(self._explicit @ u)

    def react(self, u: FloatArray) -> FloatArray:
        return logistic_flow(u, self._growth)

    def __call__(self, u: FloatArray) -> FloatArray:
        return self.diffuse(self.react(self.diffuse(u)))


def heat_kernel(dx: float, dt: float) -> FloatArray:
    """Sampled ``G(x, dt)`` on ``k dx``, truncated where it drops below ``e^-40`` and summing to 1."""
    radius = int(math.ceil(math.sqrt(4.0 * dt * KERNEL_EXPONENT) / dx))
    offsets = np.arange(-radius, radius + 1) * dx
    kernel = np.exp(-(offsets**2) / (4.0 * dt))
    return kernel / np.sum(kernel)


class DuhamelStepper:
    """Reaction increment followed by convolution with the heat kernel."""

    def __init__(self, rates: FloatArray, dx: float, dt: float, boundary: str) -> None:
        if dt * float(np.max(rates)) > 1.0:
            raise StabilityError(
                f"Duhamel step loses monotonicity: dt * max b = {dt * float(np.max(rates)):.3g} > 1"
            )
        if boundary not in ("dirichlet_zero", "neumann"):
            raise InvalidParameterError(f"unknown boundary {boundary!r}")
        self._rate_dt = rates * dt
        self._kernel = heat_kernel(dx, dt)
        self._dirichlet = boundary == "dirichlet_zero"

    def __call__(self, u: FloatArray) -> FloatArray:
        w = u + self._rate_dt * u * (1.0 - u)
        if self._dirichlet:
            out = convolve1d(w, self._kernel, mode="constant", cval=0.0)
            out[0] = out[-1] = 0.0
            return out
        return convolve1d(w, self._kernel, mode="mirror")


Stepper = Union[StrangStepper, DuhamelStepper]


def make_stepper(
    b: PeriodicCoefficient,
    grid: SpatialGrid,
    dt: float,
    scheme: str = "strang_cn",
    boundary: str = "dirichlet_zero",
    atom_mode: str = "lump",
) -> Stepper:
    """Build the stepper for ``scheme`` on ``grid``."""
    rates = rates_on_grid(b, grid, atom_mode)
    if scheme == "strang_cn":
        return StrangStepper(rates, grid.dx, dt, boundary)
    if scheme == "duhamel":
        return DuhamelStepper(rates, grid.dx, dt, boundary)
    raise InvalidParameterError(f"unknown scheme {scheme!r}")


def _check_range(u: FloatArray, ceiling: float, step: int) -> None:
    low = float(np.min(u))
    if low < -UNDERSHOOT_TOL:
        raise SchemeViolationError(f"undershoot {low:.3e} at step {step}")
    high = float(np.max(u))
    if high > ceiling + OVERSHOOT_TOL:
        raise SchemeViolationError(f"overshoot {high:.3e} above {ceiling} at step {step}")


def step_strang(
    u: ArrayLike,
    b: PeriodicCoefficient,
    dt: float,
    grid: SpatialGrid,
    boundary: str = "dirichlet_zero",
    atom_mode: str = "lump",
) -> FloatArray:
    """One Strang step; builds the factorization, so loops should use :func:`make_stepper`."""
    arr = _initial(u, grid)
    out = make_stepper(b, grid, dt, "strang_cn", boundary, atom_mode)(arr)
    _check_range(out, max(1.0, float(np.max(arr))), 1)
    return out


def step_duhamel(
    u: ArrayLike,
    b: PeriodicCoefficient,
    dt: float,
    grid: SpatialGrid,
    boundary: str = "dirichlet_zero",
    atom_mode: str = "lump",
) -> FloatArray:
    """One exponential-Euler step of the mild formulation."""
    arr = _initial(u, grid)
    out = make_stepper(b, grid, dt, "duhamel", boundary, atom_mode)(arr)
    _check_range(out, max(1.0, float(np.max(arr))), 1)
    return out


def default_initial_data(grid: SpatialGrid) -> FloatArray:
    """Indicator of ``[-0.5, 0.5]`` with a one-cell linear ramp at each edge."""
    x = grid.x
    return np.clip((0.5 - np.abs(x)) / grid.dx + 0.5, 0.0, 1.0)


def _initial(u0: Optional[ArrayLike], grid: SpatialGrid) -> FloatArray:
    if u0 is None:
        return default_initial_data(grid)
    arr = np.array(u0, dtype=float)
    if arr.shape != (grid.n,):
        raise InvalidParameterError(f"initial data must have {grid.n} samples, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidParameterError("initial data must be finite and nonnegative")
    return arr


def level_crossings(x: FloatArray, u: FloatArray, theta: float) -> Tuple[float, float]:
    """Rightmost and leftmost positions where ``u`` crosses ``theta``, linearly interpolated."""
    above = np.flatnonzero(u >= theta)
    if above.size == 0:
        return math.nan, math.nan
    i, j = int(above[-1]), int(above[0])
    dx = float(x[1] - x[0])
    right = float(x[i])
    if i + 1 < u.size:
        right += (u[i] - theta) / (u[i] - u[i + 1]) * dx
    left = float(x[j])
    if j > 0:
        left -= (u[j] - theta) / (u[j] - u[j - 1]) * dx
    return right, left


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Snapshots and front positions of one run. Arrays are read-only."""

    x: FloatArray
    times: FloatArray
    snapshots: FloatArray
    front_pos: FloatArray
    sup_norm: FloatArray
    period: float
    dx: float
    half_width: float
    theta: float
    steps: int
    contaminated: bool = False
    contaminated_at: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("x", "times", "snapshots", "front_pos", "sup_norm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def final(self) -> FloatArray:
        return self.snapshots[-1]

    def clean_until(self) -> float:
        """Last time before the boundary was reached."""
        return self.contaminated_at if self.contaminated_at is not None else float(self.times[-1])


def simulate(
    b: PeriodicCoefficient,
    u0: Optional[ArrayLike] = None,
    cfg: Optional[SimulationConfig] = None,
) -> SimulationTrace:
    """Run the configured scheme to ``t_end`` and record snapshots.

    The step is shrunk so an integer number of steps lands on ``t_end``.
    Reaching the boundary layer (``u > 1e-8`` within ``2L`` of ``±X``) flags
    the trace instead of stopping it.
    """
    cfg = cfg or SimulationConfig()
    grid = cfg.validate_for(b)
    u = _initial(u0, grid)
    ceiling = max(1.0, float(np.max(u)))
    steps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9))
    dt = cfg.t_end / steps
    stepper = make_stepper(b, grid, dt, cfg.scheme, cfg.boundary, cfg.atom_mode)
    every = max(1, int(round(cfg.snapshot_every / dt)))

    x = grid.x
    edge = np.abs(x) >= cfg.half_width - 2.0 * b.period
    times = [0.0]
    snaps = [u.copy()]
    contaminated_at: Optional[float] = None

    log = logger.bind(scheme=cfg.scheme, n=grid.n, dt=dt, steps=steps)
    log.info("Simulation started", t_end=cfg.t_end)
    for k in range(1, steps + 1):
        u = stepper(u)
        _check_range(u, ceiling, k)
        if k % every == 0 or k == steps:
            t = k * dt
            times.append(t)
            snaps.append(u.copy())
            if contaminated_at is None and float(np.max(u[edge])) > CONTAMINATION_LEVEL:
                contaminated_at = t
                log.warning("Solution reached the boundary layer", t=t)

    snapshots = np.vstack(snaps)
    fronts = np.array([(t, *level_crossings(x, s, cfg.theta)) for t, s in zip(times, snaps)])
    get_metrics_tracker().record_simulation(steps, contaminated_at is not None)
    log.info("Simulation finished", contaminated=contaminated_at is not None)
    return SimulationTrace(
        x=x,
        times=np.array(times),
        snapshots=snapshots,
        front_pos=fronts,
        sup_norm=np.max(snapshots, axis=1),
        period=b.period,
        dx=grid.dx,
        half_width=cfg.half_width,
        theta=cfg.theta,
        steps=steps,
        contaminated=contaminated_at is not None,
        contaminated_at=contaminated_at,
        config=cfg.model_dump(),
    )


def duhamel_bound(m: float, t: float) -> float:
    """``e^{M²t/4} (1 + M √(t/π))``, the heat-kernel estimate of the difference growth."""
    return math.exp(m * m * t / 4.0) * (1.0 + m * math.sqrt(t / math.pi))


def gronwall_bound(m: float, t: float) -> float:
    """``e^{Mt}``, from ``|b (1 - u - v)| <= M`` and the comparison principle."""
    return math.exp(m * t)


def continuous_dependence_probe(
    b: PeriodicCoefficient,
    u0: ArrayLike,
    v0: ArrayLike,
    t: float,
    cfg: Optional[SimulationConfig] = None,
) -> float:
    """``‖u(t) - v(t)‖∞ / ‖u0 - v0‖∞`` for two runs on the same grid."""
    if not t > 0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    cfg = (cfg or SimulationConfig()).model_copy(update={"t_end": t})
    grid = cfg.validate_for(b)
    a, c = _initial(u0, grid), _initial(v0, grid)
    denom = float(np.max(np.abs(a - c)))
    if denom == 0.0:
        raise InvalidParameterError("initial data coincide: ratio undefined")
    ua = simulate(b, a, cfg).final
    uc = simulate(b, c, cfg).final
    ratio = float(np.max(np.abs(ua - uc))) / denom
    m = float(np.max(rates_on_grid(b, grid, cfg.atom_mode)))
    logger.info(
        "Continuous dependence ratio",
        ratio=ratio,
        t=t,
        duhamel_bound=duhamel_bound(m, t),
        gronwall_bound=gronwall_bound(m, t),
        atomic=b.has_atoms,
    )
    return ratio


def write_front_csv(trace: SimulationTrace, path: Union[str, Path]) -> Path:
    """CSV with columns ``t, x_plus, x_minus, sup_norm``."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x_plus", "x_minus", "sup_norm"])
        for (t, xp, xm), s in zip(trace.front_pos, trace.sup_norm):
            writer.writerow([repr(float(t)), repr(float(xp)), repr(float(xm)), repr(float(s))])
    return out


def write_snapshots(trace: SimulationTrace, path: Union[str, Path]) -> Path:
    """Binary dump (``.npz``) of grid, times and snapshots."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(out, x=trace.x, times=trace.times, snapshots=trace.snapshots)
    return out


def write_heatmap_svg(trace: SimulationTrace, path: Union[str, Path]) -> Path:
    """Space-time heatmap of ``u`` as a standalone SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 5))
    image = ax.imshow(
        trace.snapshots,
        aspect="auto",
        origin="lower",
        extent=(float(trace.x[0]), float(trace.x[-1]), float(trace.times[0]), float(trace.times[-1])),
        cmap="viridis",
        vmin=0.0,
        vmax=1.0,
        interpolation="nearest",
    )
    ax.plot(trace.front_pos[:, 1], trace.front_pos[:, 0], color="white", linewidth=0.8)
    ax.plot(trace.front_pos[:, 2], trace.front_pos[:, 0], color="white", linewidth=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.colorbar(image, ax=ax, label="u")
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out
