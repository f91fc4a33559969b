"""Transfer-matrix principal eigenvalues for step profiles and atomic combs.

On a segment with constant level ``β`` the system
``(ψ, ψ')' = [[0, 1], [-(μ + β), 2λ]] (ψ, ψ')`` has the closed-form propagator
``e^{λs}(C·I + S·B)`` with ``B = [[-λ, 1], [-(μ+β), λ]]`` and ``B² = (λ² - μ - β) I``.
An atom of mass ``m`` multiplies by ``[[1, 0], [-m, 1]]``. The product over
one cell is the monodromy ``M`` with ``det M = e^{2λL}``; a positive periodic
eigenfunction exists exactly when ``tr M = 1 + e^{2λL}`` and the eigenvector
for the eigenvalue 1 stays positive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from kppfront.core.coeff import PeriodicCoefficient, digest, segments
from kppfront.core.eigen import EigenPair, eigenvalue_band
from kppfront.exceptions import (
    BracketFailureError,
    InvalidParameterError,
    KPPFrontError,
    PrincipalBranchError,
    UnsupportedInputError,
)
from kppfront.utils.logging import get_logger
from kppfront.utils.metrics import get_metrics_tracker

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

BRACKET_MARGIN = 0.5
SCAN_POINTS = 256
ROOT_TOL = 1e-12
MAX_BISECTIONS = 200
CERTIFICATE_SAMPLES = 64
SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class Piece:
    """A constant-level stretch of the cell, preceded by an atom of mass ``jump``."""

    start: float
    length: float
    level: float
    jump: float = 0.0


def _cosh_sinh(d: float, s: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """``C, S`` of ``exp(sB)`` for ``B² = d``, stable through ``d = 0``."""
    s = np.asarray(s, dtype=float)
    x = d * s * s
    if d > 0:
        r = math.sqrt(d)
        c = np.cosh(r * s)
        sn = np.sinh(r * s) / r
    elif d < 0:
        w = math.sqrt(-d)
        c = np.cos(w * s)
        sn = np.sin(w * s) / w
    else:
        c = np.ones_like(s)
        sn = s.copy()
    small = np.abs(x) < SERIES_CUTOFF
    if np.any(small):
        xs = x[small] if x.ndim else x
        c_series = 1.0 + xs / 2.0 + xs * xs / 24.0
        s_series = (s[small] if s.ndim else s) * (1.0 + xs / 6.0 + xs * xs / 120.0)
        if s.ndim:
            c = np.array(c, dtype=float)
            sn = np.array(sn, dtype=float)
            c[small] = c_series
            sn[small] = s_series
        else:
            c, sn = c_series, s_series
    return c, sn


def interval_propagator(level: float, length: float, lam: float, mu: float) -> FloatArray:
    """Exact ``exp`` of the companion matrix over a segment of constant level."""
    if not length > 0:
        raise InvalidParameterError(f"segment length must be positive, got {length!r}")
    q = mu + level
    c, s = _cosh_sinh(lam * lam - q, np.asarray(length, dtype=float))
    c, s = float(c), float(s)
    grow = math.exp(lam * length)
    return grow * np.array([[c - lam * s, s], [-q * s, c + lam * s]])


def atom_jump(mass: float) -> FloatArray:
    """Jump ``ψ'(x+) - ψ'(x-) = -m ψ(x)`` as a unimodular matrix."""
    if mass < 0:
        raise InvalidParameterError(f"atom mass must be nonnegative, got {mass!r}")
    return np.array([[1.0, 0.0], [-float(mass), 1.0]])


def pieces(b: PeriodicCoefficient) -> List[Piece]:
    """Split one cell into constant-level pieces, cutting at every atom."""
    if not b.is_exact:
        raise UnsupportedInputError(
            "transfer matrices need piecewise-constant or atomic coefficients"
        )
    L = b.period
    cont = b.continuous
    steps = segments(cont, L) if cont is not None else [(0.0, L, 0.0)]
    masses = {a.position: a.mass for a in b.atoms}
    cuts = sorted({s for s, _, _ in steps} | set(masses))
    starts = np.array([s for s, _, _ in steps])
    out: List[Piece] = []
    for k, start in enumerate(cuts):
        end = cuts[k + 1] if k + 1 < len(cuts) else L
        level = steps[int(np.searchsorted(starts, start, side="right")) - 1][2]
        out.append(Piece(start, end - start, level, masses.get(start, 0.0)))
    return out


@dataclass(frozen=True, eq=False)
class Monodromy:
    """Cell map of ``(ψ, ψ')`` at given ``(λ, μ)``."""

    matrix: FloatArray
    lam: float
    mu: float
    period: float

    @property
    def trace(self) -> float:
        return float(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def expected_det(self) -> float:
        """``e^{2λL}`` from the Abel identity."""
        return math.exp(2.0 * self.lam * self.period)

    @property
    def dispersion(self) -> float:
        """``tr M - 1 - e^{2λL}``; zero on the dispersion relation."""
        return self.trace - 1.0 - self.expected_det

    @property
    def scaled_residual(self) -> float:
        return abs(self.dispersion) / (abs(self.trace) + 1.0 + self.expected_det)


def _assemble(parts: Sequence[Piece], lam: float, mu: float) -> FloatArray:
    m = np.eye(2)
    for p in parts:
        if p.jump:
            m = atom_jump(p.jump) @ m
        m = interval_propagator(p.level, p.length, lam, mu) @ m
    return m


def monodromy(b: PeriodicCoefficient, lam: float, mu: float) -> Monodromy:
    """Product of piece propagators and atom jumps over ``[0, L)``."""
    return Monodromy(_assemble(pieces(b), lam, mu), lam, mu, b.period)


def dispersion_function(b: PeriodicCoefficient, lam: float, mu: float) -> float:
    """``g(λ, μ) = tr M(λ, μ) - 1 - e^{2λL}``."""
    return monodromy(b, lam, mu).dispersion


@dataclass(frozen=True, eq=False)
class FloquetRoot:
    """A certified dispersion root."""

    lam: float
    mu: float
    residual: float
    bracket: Tuple[float, float]


def _first_sign_change(
    parts: Sequence[Piece], lam: float, lo: float, hi: float
) -> Optional[Tuple[float, float, float]]:
    grid = np.linspace(lo, hi, SCAN_POINTS + 1)
    values = [_dispersion(parts, lam, mu) for mu in grid]
    for k in range(SCAN_POINTS):
        if values[k] == 0.0:
            return grid[k], grid[k], values[k]
        if values[k] * values[k + 1] < 0:
            return grid[k], grid[k + 1], values[k]
    return None


def _dispersion(parts: Sequence[Piece], lam: float, mu: float) -> float:
    m = _assemble(parts, lam, mu)
    return float(m[0, 0] + m[1, 1]) - 1.0 - math.exp(2.0 * lam * sum(p.length for p in parts))


def null_vector(matrix: FloatArray) -> FloatArray:
    """Eigenvector of a monodromy for the eigenvalue 1, first component >= 0."""
    v1 = np.array([matrix[0, 1], 1.0 - matrix[0, 0]])
    v2 = np.array([1.0 - matrix[1, 1], matrix[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) == 0.0:
        v = np.array([1.0, 0.0])
    return -v if v[0] < 0 else v


def eigenfunction(
    b: PeriodicCoefficient,
    lam: float,
    mu: float,
    x: Optional[ArrayLike] = None,
) -> Tuple[FloatArray, FloatArray]:
    """Sample the periodic solution with ``(ψ, ψ')(0)`` from :func:`null_vector`.

    Without ``x``, every piece is sampled at 64 evenly spaced points starting
    at its left end. Returns ``(x, ψ)`` with ``max |ψ| = 1``.
    """
    parts = pieces(b)
    if x is None:
        xs = np.concatenate(
            [p.start + p.length * np.arange(CERTIFICATE_SAMPLES) / CERTIFICATE_SAMPLES for p in parts]
        )
    else:
        xs = np.mod(np.asarray(x, dtype=float), b.period)
    order = np.argsort(xs, kind="stable")
    psi = np.empty(xs.size)
    state = null_vector(_assemble(parts, lam, mu))
    starts = np.array([p.start for p in parts])
    owner = np.searchsorted(starts, xs[order], side="right") - 1
    for k, p in enumerate(parts):
        if p.jump:
            state = atom_jump(p.jump) @ state
        idx = order[owner == k]
        if idx.size:
            s = xs[idx] - p.start
            q = mu + p.level
            c, sn = _cosh_sinh(lam * lam - q, s)
            psi[idx] = np.exp(lam * s) * ((c - lam * sn) * state[0] + sn * state[1])
        state = interval_propagator(p.level, p.length, lam, mu) @ state
    scale = float(np.max(np.abs(psi)))
    return xs, psi / scale if scale > 0 else psi


def dispersion_root(b: PeriodicCoefficient, lam: float) -> FloquetRoot:
    """Lowest root of ``g(λ, ·)`` in the eigenvalue band, with a positivity certificate.

    Raises:
        UnsupportedInputError: ``b`` has a sampled part.
        BracketFailureError: no sign change even after one widening.
        PrincipalBranchError: the root's eigenfunction is not positive.
    """
    if not math.isfinite(lam):
        raise InvalidParameterError(f"lambda must be finite, got {lam!r}")
    parts = pieces(b)
    low, high = eigenvalue_band(b)
    lo, hi = low - BRACKET_MARGIN, high + BRACKET_MARGIN
    found = _first_sign_change(parts, lam, lo, hi)
    if found is None:
        widen = (b.alpha * b.period) ** 2 + BRACKET_MARGIN
        lo, hi = lo - widen, hi + widen
        logger.warning("Widening dispersion bracket", lam=lam, lo=lo, hi=hi)
        found = _first_sign_change(parts, lam, lo, hi)
    if found is None:
        get_metrics_tracker().record_eigen_failure()
        raise BracketFailureError(f"dispersion function has no sign change in [{lo}, {hi}] at lambda={lam}")

    a, c, ga = found
    bracket = (a, c)
    # Bisect to float resolution; ROOT_TOL is the guaranteed width.
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (a + c)
        if mid <= a or mid >= c:
            break
        gm = _dispersion(parts, lam, mid)
        if gm == 0.0:
            a = c = mid
            break
        if ga * gm < 0:
            c = mid
        else:
            a, ga = mid, gm
    if c - a > ROOT_TOL:
        logger.warning("Bisection stopped above root tolerance", lam=lam, width=c - a)
    mu = 0.5 * (a + c)

    _, psi = eigenfunction(b, lam, mu)
    if np.any(psi <= 0):
        get_metrics_tracker().record_eigen_failure()
        raise PrincipalBranchError(
            f"eigenfunction at lambda={lam}, mu={mu} is not positive (min {float(np.min(psi)):.3e})"
        )
    get_metrics_tracker().record_floquet_root()
    root = FloquetRoot(lam, mu, monodromy(b, lam, mu).scaled_residual, bracket)
    logger.debug("Dispersion root found", lam=lam, mu=mu, residual=root.residual)
    return root


def dispersion_mu(b: PeriodicCoefficient, lam: float) -> float:
    """The principal eigenvalue ``μ(λ, b)`` from the dispersion relation."""
    return dispersion_root(b, lam).mu


def floquet_eigenpair(b: PeriodicCoefficient, lam: float, grid_n: int = 2048) -> EigenPair:
    """The dispersion root packaged as an :class:`EigenPair` on a uniform grid."""
    root = dispersion_root(b, lam)
    x = np.arange(grid_n) * (b.period / grid_n)
    _, psi = eigenfunction(b, lam, root.mu, x)
    return EigenPair(lam, root.mu, psi / np.max(psi), grid_n, "floquet", root.residual, b.period)


@dataclass(frozen=True, eq=False)
class DispersionCurve:
    """``μ(λ_i)`` on an increasing λ grid; failed points hold NaN."""

    lambdas: FloatArray
    mus: FloatArray
    residuals: FloatArray
    b_hash: str
    failures: Tuple[Tuple[float, str], ...] = field(default=())

    def rows(self) -> List[Tuple[float, float, float]]:
        return [
            (float(l), float(m), float(r))
            for l, m, r in zip(self.lambdas, self.mus, self.residuals)
        ]


def dispersion_curve(
    b: PeriodicCoefficient, lambdas: ArrayLike, workers: int = 1
) -> DispersionCurve:
    """Evaluate :func:`dispersion_root` over a λ grid, keeping going on per-point errors."""
    lams = np.asarray(lambdas, dtype=float)
    if lams.ndim != 1 or np.any(np.diff(lams) <= 0):
        raise InvalidParameterError("lambdas must be a strictly increasing 1-D array")

    def _solve(lam: float) -> Tuple[float, float, Optional[str]]:
        try:
            root = dispersion_root(b, lam)
            return root.mu, root.residual, None
        except KPPFrontError as e:
            logger.error("Dispersion point failed", lam=lam, error=str(e), exc_info=True)
            return math.nan, math.nan, str(e)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve, lams.tolist()))
    else:
        results = [_solve(lam) for lam in lams.tolist()]

    failures = tuple((float(lam), err) for lam, (_, _, err) in zip(lams, results) if err)
    return DispersionCurve(
        lambdas=lams,
        mus=np.array([r[0] for r in results]),
        residuals=np.array([r[1] for r in results]),
        b_hash=digest(b),
        failures=failures,
    )
