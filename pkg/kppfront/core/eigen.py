"""Principal periodic eigenpairs of ``-ψ'' + 2λψ' - bψ = μψ``.

Two solvers share one discrete operator:

* :func:`principal_eigenpair_fd` runs shifted inverse iteration on the sparse
  finite-difference matrix;
* :func:`principal_eigenpair_evolution` runs power iteration on the implicit
  time-stepping operator of ``v_t = v_xx - 2λ v_x + b v``.

The discrete operator is an M-matrix-type stencil with ``A(-λ) = A(λ)^T``, so
the computed principal eigenvalue is exactly even in ``λ``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.sparse.linalg import splu

from kppfront.config.settings import get_settings
from kppfront.core.coeff import (
    PeriodicCoefficient,
    continuous_node_values,
    node_values,
)
from kppfront.exceptions import (
    InvalidParameterError,
    IterationLimitError,
    SpuriousModeError,
    StabilityError,
    UnsupportedInputError,
)
from kppfront.utils.logging import get_logger
from kppfront.utils.metrics import get_metrics_tracker

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

SHIFT_MARGIN = 1.0
EVOLUTION_SAFETY = 0.4
POLISH_STEPS = 3


class SolverConfig(BaseModel):
    """Numerical knobs shared by the eigen and speed modules."""

    model_config = ConfigDict(frozen=True)

    grid_n: int = Field(2048, description="Grid points per period")
    tolerance: float = Field(1e-10, description="Scaled residual tolerance")
    max_iterations: int = Field(10000, description="Iteration budget")
    evolution_dt: Optional[float] = Field(
        None, description="Implicit step of the evolution solver; None picks a safe default"
    )
    evolution_time: float = Field(1.0, description="Time horizon t of one power iteration")
    atom_mode: Literal["lump", "split"] = Field("lump")
    scan_points: int = Field(48, description="Geometric lambda scan size")
    lambda_tol: float = Field(1e-6, description="Golden-section bracket width")
    workers: int = Field(1, description="Threads for lambda scans")

    @field_validator("grid_n")
    @classmethod
    def check_grid(cls, v: int) -> int:
        """At least 64 points per period."""
        if v < 64:
            raise ValueError("grid_n must be >= 64")
        return v

    @field_validator("tolerance", "lambda_tol", "evolution_time")
    @classmethod
    def check_positive(cls, v: float) -> float:
        """Strictly positive."""
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("evolution_dt")
    @classmethod
    def check_dt(cls, v: Optional[float]) -> Optional[float]:
        """A given step must be positive."""
        if v is not None and not v > 0:
            raise ValueError("evolution_dt must be positive")
        return v

    @field_validator("max_iterations", "workers")
    @classmethod
    def check_count(cls, v: int) -> int:
        """At least one."""
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("scan_points")
    @classmethod
    def check_scan(cls, v: int) -> int:
        """A scan needs interior points."""
        if v < 5:
            raise ValueError("scan_points must be >= 5")
        return v

    @classmethod
    def from_settings(cls, **overrides: object) -> "SolverConfig":
        """Defaults from the environment, with explicit overrides."""
        s = get_settings()
        values = {
            "grid_n": s.GRID_N,
            "tolerance": s.TOLERANCE,
            "max_iterations": s.MAX_ITERATIONS,
            "scan_points": s.SCAN_POINTS,
            "lambda_tol": s.LAMBDA_TOL,
            "workers": s.WORKERS,
        }
        values.update(overrides)
        return cls(**values)

    def dt_for(self, b: PeriodicCoefficient) -> float:
        """The evolution step: configured, or ``0.4 / (α + α²L²)``."""
        if self.evolution_dt is not None:
            return self.evolution_dt
        return EVOLUTION_SAFETY / upper_rate(b)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Principal eigenvalue and its positive eigenfunction, ``max ψ = 1``."""

    lam: float
    mu: float
    psi: FloatArray
    grid_n: int
    method: str
    residual: float
    period: float
    iterations: int = 0

    def __post_init__(self) -> None:
        psi = np.array(self.psi, dtype=float)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def ratio(self) -> float:
        """``max ψ / min ψ``."""
        return float(np.max(self.psi) / np.min(self.psi))

    @property
    def x(self) -> FloatArray:
        return np.arange(self.grid_n) * (self.period / self.grid_n)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "residual": self.residual,
            "grid_n": self.grid_n,
            "method": self.method,
            "iterations": self.iterations,
            "ratio": self.ratio,
        }


def upper_rate(b: PeriodicCoefficient) -> float:
    """``α + α²L²``, the largest possible ``-μ``."""
    return b.alpha + (b.alpha * b.period) ** 2


def eigenvalue_band(b: PeriodicCoefficient) -> Tuple[float, float]:
    """The interval ``[-α - α²L², -α]`` holding every principal eigenvalue."""
    return -upper_rate(b), -b.alpha


def ratio_bound(b: PeriodicCoefficient) -> float:
    """``e^{αL²}``, the a-priori bound on ``max ψ / min ψ``."""
    return math.exp(b.alpha * b.period**2)


def sharp_ratio_bound(b: PeriodicCoefficient, mu: float) -> float:
    """``e^{L√(-(μ+α))}``; sharper than :func:`ratio_bound` once μ is known."""
    return math.exp(b.period * math.sqrt(max(0.0, -(mu + b.alpha))))


def _bernoulli(z: float) -> float:
    """``z / (e^z - 1)`` with the removable singularity at 0."""
    if z == 0.0:
        return 1.0
    return z / math.expm1(z)


def build_operator(
    b: PeriodicCoefficient, lam: float, n: int, atom_mode: str = "lump"
) -> sp.csr_matrix:
    """Periodic FD matrix of ``ψ -> -ψ'' + 2λψ' - bψ`` on ``n`` nodes.

    Centered differences while ``|λ|h <= 1``, exponentially fitted
    (Scharfetter-Gummel) coefficients beyond that. Off-diagonals stay
    nonpositive either way.
    """
    if not math.isfinite(lam):
        raise InvalidParameterError(f"lambda must be finite, got {lam!r}")
    h = b.period / n
    if abs(lam) * h <= 1.0:
        upper = -1.0 / h**2 + lam / h
        lower = -1.0 / h**2 - lam / h
    else:
        z = 2.0 * lam * h
        upper = -_bernoulli(z) / h**2
        lower = -_bernoulli(-z) / h**2
    diag = -(upper + lower) - node_values(b, n, atom_mode)
    rows = np.arange(n)
    data = np.concatenate((diag, np.full(n, upper), np.full(n, lower)))
    i = np.concatenate((rows, rows, rows))
    j = np.concatenate((rows, (rows + 1) % n, (rows - 1) % n))
    return sp.csr_matrix((data, (i, j)), shape=(n, n))


def _scaled_residual(A: sp.csr_matrix, norm_a: float, v: FloatArray, mu: float) -> float:
    return float(np.max(np.abs(A @ v - mu * v)) / (norm_a * np.max(np.abs(v))))


def _operator_norm(A: sp.csr_matrix) -> float:
    return float(np.max(np.asarray(abs(A).sum(axis=1)).ravel()))


def _finish(v: FloatArray, lam: float, method: str) -> FloatArray:
    if np.any(v <= 0):
        get_metrics_tracker().record_eigen_failure()
        raise SpuriousModeError(
            f"{method} eigenvector changes sign at lambda={lam} (min {float(np.min(v)):.3e})"
        )
    return v / np.max(v)


def principal_eigenpair_fd(
    b: PeriodicCoefficient, lam: float, cfg: Optional[SolverConfig] = None
) -> EigenPair:
    """Shifted inverse iteration for the principal eigenpair.

    The shift ``σ = -α - α²L² - 1`` lies below every principal eigenvalue, so
    the principal one is the dominant eigenvalue of ``(A - σI)^{-1}``.

    Raises:
        IterationLimitError: residual not below ``cfg.tolerance`` in budget.
        SpuriousModeError: the converged vector is not positive.
    """
    cfg = cfg or SolverConfig.from_settings()
    n = cfg.grid_n
    A = build_operator(b, lam, n, cfg.atom_mode)
    norm_a = _operator_norm(A)
    sigma = -upper_rate(b) - SHIFT_MARGIN
    lu = splu((A - sigma * sp.identity(n, format="csr")).tocsc())

    v = np.ones(n)
    mu = float("nan")
    residual = float("inf")
    converged_at: Optional[int] = None
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        w = lu.solve(v)
        v = w / w[np.argmax(np.abs(w))]
        Av = A @ v
        mu = float(v @ Av / (v @ v))
        residual = _scaled_residual(A, norm_a, v, mu)
        if converged_at is None and residual <= cfg.tolerance:
            converged_at = iteration
        if converged_at is not None and iteration - converged_at >= POLISH_STEPS:
            break
    if converged_at is None:
        get_metrics_tracker().record_eigen_failure()
        raise IterationLimitError(
            f"inverse iteration did not converge at lambda={lam} in {cfg.max_iterations} steps",
            residual,
        )

    psi = _finish(v, lam, "fd")
    get_metrics_tracker().record_eigensolve("fd", iteration)
    logger.debug("FD eigenpair computed", lam=lam, mu=mu, residual=residual, iterations=iteration)
    return EigenPair(lam, mu, psi, n, "fd", residual, b.period, iteration)


def semigroup_multiplier(mu: float, t: float) -> float:
    """Dominant eigenvalue ``e^{-μt}`` of the time-``t`` solution operator."""
    if not t > 0:
        raise InvalidParameterError(f"time must be positive, got {t!r}")
    return math.exp(-mu * t)


def semigroup_rate(rho: float, t: float) -> float:
    """``μ = -ln ρ / t`` from the time-``t`` multiplier ``ρ``."""
    if not (rho > 0 and t > 0):
        raise InvalidParameterError(f"need rho > 0 and t > 0, got rho={rho!r}, t={t!r}")
    return -math.log(rho) / t


def principal_eigenpair_evolution(
    b: PeriodicCoefficient,
    lam: float,
    t: Optional[float] = None,
    cfg: Optional[SolverConfig] = None,
) -> EigenPair:
    """Power iteration on the time-``t`` map of ``v_t = v_xx - 2λv_x + bv``.

    One time step is the backward-Euler resolvent ``(I + dt A)^{-1}``, which is
    entrywise nonnegative while ``dt (α + α²L²) < 1``. Its dominant eigenvalue
    ``ρ`` gives ``μ = (1/ρ - 1) / dt``. The exact time-``t`` semigroup has
    multiplier ``e^{-μt}`` (see :func:`semigroup_multiplier`), so the returned
    ``μ`` maps to the continuous-time ``ρ`` through that function, and
    :func:`semigroup_rate` inverts it.

    Raises:
        StabilityError: ``dt (α + α²L²) >= 1``.
        IterationLimitError: no convergence within the budget.
        SpuriousModeError: the fixed vector is not positive.
    """
    cfg = cfg or SolverConfig.from_settings()
    t = cfg.evolution_time if t is None else t
    if not t > 0:
        raise InvalidParameterError(f"evolution time must be positive, got {t!r}")
    dt = cfg.dt_for(b)
    if dt * upper_rate(b) >= 1.0:
        raise StabilityError(
            f"evolution step dt={dt} breaks positivity: need dt*(alpha+alpha^2 L^2) < 1"
        )
    n = cfg.grid_n
    A = build_operator(b, lam, n, cfg.atom_mode)
    norm_a = _operator_norm(A)
    lu = splu((sp.identity(n, format="csr") + dt * A).tocsc())
    steps = max(1, math.ceil(t / dt - 1e-12))

    v = np.ones(n)
    mu = float("nan")
    rho = float("nan")
    residual = float("inf")
    converged_at: Optional[int] = None
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        w = v
        for _ in range(steps):
            w = lu.solve(w)
        if np.any(w < 0):
            raise StabilityError("evolution step produced negative values")
        rho = float(v @ w / (v @ v))
        rho_step = rho ** (1.0 / steps)
        mu = (1.0 / rho_step - 1.0) / dt
        v = w / np.max(w)
        residual = _scaled_residual(A, norm_a, v, mu)
        if converged_at is None and residual <= cfg.tolerance:
            converged_at = iteration
        if converged_at is not None and iteration - converged_at >= POLISH_STEPS:
            break
    if converged_at is None:
        get_metrics_tracker().record_eigen_failure()
        raise IterationLimitError(
            f"power iteration did not converge at lambda={lam} in {cfg.max_iterations} steps",
            residual,
        )

    psi = _finish(v, lam, "evolution")
    get_metrics_tracker().record_eigensolve("evolution", iteration)
    logger.debug(
        "Evolution eigenpair computed",
        lam=lam,
        mu=mu,
        rho=rho,
        semigroup_mu=semigroup_rate(rho, steps * dt),
        residual=residual,
        iterations=iteration,
    )
    return EigenPair(lam, mu, psi, n, "evolution", residual, b.period, iteration)


def principal_eigenpair(
    b: PeriodicCoefficient, lam: float, cfg: Optional[SolverConfig] = None
) -> EigenPair:
    """FD eigenpair, falling back to the evolution solver on a sign-changing vector."""
    try:
        return principal_eigenpair_fd(b, lam, cfg)
    except SpuriousModeError as e:
        get_metrics_tracker().record_fallback()
        logger.warning("FD eigenvector not positive, using evolution solver", lam=lam, error=str(e))
        return principal_eigenpair_evolution(b, lam, cfg=cfg)


def _check_trial(b: PeriodicCoefficient, psi: ArrayLike) -> FloatArray:
    arr = np.asarray(psi, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidParameterError("trial function needs at least 2 samples")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidParameterError("trial function must be positive")
    return arr


def rayleigh_mu0(b: PeriodicCoefficient, psi: ArrayLike) -> float:
    """``(∫ψ'² - ∫bψ²) / ∫ψ²`` for periodic samples on the cell grid.

    ``ψ'`` is taken from the piecewise-linear interpolant; the other integrals
    use nodal quadrature, and atoms see ``ψ`` interpolated at their positions.
    """
    arr = _check_trial(b, psi)
    n = arr.size
    L = b.period
    h = L / n
    grad = float(np.sum(np.diff(np.append(arr, arr[0])) ** 2)) / h
    norm = h * float(np.sum(arr**2))
    potential = h * float(np.sum(continuous_node_values(b, n) * arr**2))
    if b.atoms:
        xp = np.append(np.arange(n) * h, L)
        fp = np.append(arr, arr[0])
        for atom in b.atoms:
            potential += atom.mass * float(np.interp(atom.position, xp, fp)) ** 2
    return (grad - potential) / norm


def maxmin_check(
    b: PeriodicCoefficient, pair: EigenPair, atom_mode: str = "lump"
) -> float:
    """``min_i (Aψ)_i / ψ_i``, the discrete max-min characterization of μ."""
    if b.has_atoms:
        raise UnsupportedInputError("max-min quotient needs a coefficient without atoms")
    A = build_operator(b, pair.lam, pair.grid_n, atom_mode)
    return float(np.min((A @ pair.psi) / pair.psi))


def log_derivative_identity(b: PeriodicCoefficient, pair: EigenPair) -> float:
    """Defect of ``(μ + α)L + ∫(ψ'/ψ)² = 0``.

    The integral uses ``(ψ_{i+1} - ψ_i)² / (ψ_i ψ_{i+1} h)``, which makes the
    identity exact for the discrete problem at ``λ = 0``.
    """
    psi = pair.psi
    nxt = np.roll(psi, -1)
    h = b.period / pair.grid_n
    integral = float(np.sum((nxt - psi) ** 2 / (psi * nxt))) / h
    return (pair.mu + b.alpha) * b.period + integral


@dataclass(frozen=True)
class GridConvergence:
    """Eigenvalues on a refinement sequence and the observed order."""

    grids: Tuple[int, ...]
    mus: Tuple[float, ...]
    order: float


def grid_convergence(
    b: PeriodicCoefficient,
    lam: float,
    grids: Sequence[int] = (256, 512, 1024),
    cfg: Optional[SolverConfig] = None,
) -> GridConvergence:
    """Observed order ``log2(|μ_N - μ_2N| / |μ_2N - μ_4N|)`` on doubling grids."""
    if len(grids) != 3 or grids[1] != 2 * grids[0] or grids[2] != 2 * grids[1]:
        raise InvalidParameterError("grids must be (N, 2N, 4N)")
    cfg = cfg or SolverConfig.from_settings()
    mus = tuple(
        principal_eigenpair_fd(b, lam, cfg.model_copy(update={"grid_n": n})).mu for n in grids
    )
    d1, d2 = abs(mus[0] - mus[1]), abs(mus[1] - mus[2])
    order = math.inf if d2 == 0.0 else math.log2(d1 / d2) if d1 > 0 else 0.0
    logger.info("Observed grid order", lam=lam, grids=list(grids), mus=list(mus), order=order)
    return GridConvergence(tuple(grids), mus, order)
