"""L-periodic nonnegative coefficients with prescribed mean.

A :class:`PeriodicCoefficient` is one of four bodies: uniformly sampled values
(interpreted as a periodic piecewise-linear function), a piecewise-constant
step profile, a comb of Dirac atoms, or a continuous part plus atoms. The cell
mass always equals ``alpha * period``.

All grid-facing helpers (:func:`node_values`, :func:`weak_pairing`) share one
quadrature convention so that the eigen solver, the Rayleigh quotient and the
simulator see the same discrete coefficient.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import erf

from kppfront.exceptions import (
    InvalidParameterError,
    KernelOverlapError,
    UnsupportedInputError,
)

FloatArray = NDArray[np.float64]

DEFAULT_SAMPLES = 1024
MIN_SAMPLES = 16
MASS_RTOL = 1e-12


def _frozen(values: ArrayLike) -> FloatArray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SmoothSamples:
    """Values at ``n`` uniform points ``i * L / n`` of one cell."""

    values: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Segment ``i`` is ``[breakpoints[i], breakpoints[i+1])``; the last one wraps."""

    breakpoints: FloatArray
    levels: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "breakpoints", _frozen(self.breakpoints))
        object.__setattr__(self, "levels", _frozen(self.levels))


@dataclass(frozen=True)
class Atom:
    """A point mass."""

    position: float
    mass: float


@dataclass(frozen=True, eq=False)
class AtomComb:
    """Periodically repeated point masses."""

    atoms: Tuple[Atom, ...]


@dataclass(frozen=True, eq=False)
class Mixture:
    """A continuous profile plus point masses."""

    continuous: Union[SmoothSamples, PiecewiseConstant]
    atoms: Tuple[Atom, ...]


Continuous = Union[SmoothSamples, PiecewiseConstant]
Body = Union[SmoothSamples, PiecewiseConstant, AtomComb, Mixture]


class Kernel(str, Enum):
    """Mollifier kernel shapes."""

    TRIANGLE = "triangle"
    GAUSSIAN = "gaussian-truncated"


@dataclass(frozen=True)
class MollifierSpec:
    """Bump of support width ``width`` replacing each atom."""

    width: float
    kernel: Kernel = Kernel.TRIANGLE

    def __post_init__(self) -> None:
        if not (self.width > 0 and math.isfinite(self.width)):
            raise InvalidParameterError(f"mollifier width must be positive, got {self.width}")
        object.__setattr__(self, "kernel", Kernel(self.kernel))


@dataclass(frozen=True, eq=False)
class PeriodicCoefficient:
    """An element of the class of L-periodic nonnegative coefficients of mean alpha.

    Immutable after construction; arrays are stored read-only.
    """

    period: float
    alpha: float
    body: Body

    def __post_init__(self) -> None:
        _check_positive("period", self.period)
        _check_positive("alpha", self.alpha)
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "alpha", float(self.alpha))
        body = self.body
        if isinstance(body, (SmoothSamples, PiecewiseConstant)):
            _validate_continuous(body, self.period)
        elif isinstance(body, AtomComb):
            _validate_atoms(body.atoms, self.period)
        elif isinstance(body, Mixture):
            _validate_continuous(body.continuous, self.period)
            _validate_atoms(body.atoms, self.period)
        else:
            raise InvalidParameterError(f"unknown coefficient body {type(body).__name__}")

        target = self.alpha * self.period
        mass = self.cell_mass()
        if abs(mass - target) > MASS_RTOL * target:
            raise InvalidParameterError(
                f"cell mass {mass!r} differs from alpha*L = {target!r}"
            )

    @property
    def continuous(self) -> Optional[Continuous]:
        """The continuous part, if any."""
        if isinstance(self.body, (SmoothSamples, PiecewiseConstant)):
            return self.body
        if isinstance(self.body, Mixture):
            return self.body.continuous
        return None

    @property
    def atoms(self) -> Tuple[Atom, ...]:
        """The atoms, sorted by position."""
        if isinstance(self.body, (AtomComb, Mixture)):
            return tuple(sorted(self.body.atoms, key=lambda a: a.position))
        return ()

    @property
    def has_atoms(self) -> bool:
        return bool(self.atoms)

    @property
    def is_exact(self) -> bool:
        """True when no sampled part is present (transfer matrices apply)."""
        return not isinstance(self.continuous, SmoothSamples)

    @property
    def kind(self) -> str:
        return type(self.body).__name__

    def cell_mass(self) -> float:
        """Mass of one period: trapezoid of the continuous part plus atom masses."""
        mass = 0.0
        cont = self.continuous
        if cont is not None:
            mass += continuous_mass(cont, self.period)
        return mass + math.fsum(a.mass for a in self.atoms)


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")


def _validate_continuous(cont: Continuous, period: float) -> None:
    if isinstance(cont, SmoothSamples):
        v = cont.values
        if v.ndim != 1 or v.size < MIN_SAMPLES:
            raise InvalidParameterError(f"need at least {MIN_SAMPLES} samples, got {v.size}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidParameterError("sampled values must be finite and nonnegative")
        return
    bp, lv = cont.breakpoints, cont.levels
    if bp.ndim != 1 or bp.size == 0 or bp.size != lv.size:
        raise InvalidParameterError("breakpoints and levels must be non-empty and equal length")
    if bp[0] < 0 or bp[-1] >= period or np.any(np.diff(bp) <= 0):
        raise InvalidParameterError("breakpoints must be strictly increasing in [0, L)")
    if not np.all(np.isfinite(lv)) or np.any(lv < 0):
        raise InvalidParameterError("levels must be finite and nonnegative")


def _validate_atoms(atoms: Sequence[Atom], period: float) -> None:
    if not atoms:
        raise InvalidParameterError("an atomic coefficient needs at least one atom")
    positions = sorted(a.position for a in atoms)
    for a in atoms:
        if not (0.0 < a.position < period):
            raise InvalidParameterError(
                f"atom position {a.position!r} must lie strictly inside (0, L); shift the cell frame"
            )
        if not (a.mass > 0 and math.isfinite(a.mass)):
            raise InvalidParameterError(f"atom mass must be positive, got {a.mass!r}")
    if len(set(positions)) != len(positions):
        raise InvalidParameterError("atom positions must be pairwise distinct")


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def segments(cont: PiecewiseConstant, period: float) -> List[Tuple[float, float, float]]:
    """Split a step profile into ``(start, end, level)`` pieces covering ``[0, L)``."""
    bp = [float(x) for x in cont.breakpoints]
    lv = [float(x) for x in cont.levels]
    pieces: List[Tuple[float, float, float]] = []
    if bp[0] > 0:
        pieces.append((0.0, bp[0], lv[-1]))
    for i, start in enumerate(bp):
        end = bp[i + 1] if i + 1 < len(bp) else period
        pieces.append((start, end, lv[i]))
    return pieces


def continuous_mass(cont: Continuous, period: float) -> float:
    """Integral of the continuous part over one cell."""
    if isinstance(cont, SmoothSamples):
        return float(np.sum(cont.values)) * period / cont.n
    return math.fsum(level * (end - start) for start, end, level in segments(cont, period))


def _linear_antiderivative(values: FloatArray, period: float, x: FloatArray) -> FloatArray:
    """``∫_0^x`` of the periodic piecewise-linear interpolant of ``values``."""
    n = values.size
    h = period / n
    nxt = np.roll(values, -1)
    cell = 0.5 * h * (values + nxt)
    cum = np.concatenate(([0.0], np.cumsum(cell)))
    total = cum[-1]
    k = np.floor(x / period)
    r = x - k * period
    i = np.minimum((r / h).astype(int), n - 1)
    s = r - i * h
    inside = values[i] * s + (nxt[i] - values[i]) * s * s / (2.0 * h)
    return k * total + cum[i] + inside


def _step_antiderivative(cont: PiecewiseConstant, period: float, x: FloatArray) -> FloatArray:
    """``∫_0^x`` of the periodic step profile."""
    pieces = segments(cont, period)
    starts = np.array([p[0] for p in pieces])
    levels = np.array([p[2] for p in pieces])
    lengths = np.array([p[1] - p[0] for p in pieces])
    cum = np.concatenate(([0.0], np.cumsum(levels * lengths)))
    total = cum[-1]
    k = np.floor(x / period)
    r = x - k * period
    i = np.searchsorted(starts, r, side="right") - 1
    return k * total + cum[i] + levels[i] * (r - starts[i])


def antiderivative(cont: Continuous, period: float, x: ArrayLike) -> FloatArray:
    """Periodic antiderivative ``F(x) = ∫_0^x b`` of the continuous part."""
    xs = np.asarray(x, dtype=float)
    if isinstance(cont, SmoothSamples):
        return _linear_antiderivative(cont.values, period, xs)
    return _step_antiderivative(cont, period, xs)


def continuous_node_values(b: PeriodicCoefficient, n: int) -> FloatArray:
    """Continuous part on the ``n``-point grid.

    Samples on their own grid are returned as-is; otherwise dual-cell averages
    ``(F(x_i + h/2) - F(x_i - h/2)) / h`` are used, which conserve the mass.
    """
    cont = b.continuous
    if cont is None:
        return np.zeros(n)
    if isinstance(cont, SmoothSamples) and cont.n == n:
        return np.array(cont.values)
    h = b.period / n
    x = np.arange(n) * h
    return (antiderivative(cont, b.period, x + 0.5 * h) - antiderivative(cont, b.period, x - 0.5 * h)) / h


def atom_node_weights(b: PeriodicCoefficient, n: int, mode: str = "lump") -> FloatArray:
    """Atom densities ``m / h`` placed on grid nodes.

    ``lump`` puts the whole mass on the nearest node (first order); ``split``
    shares it between the two neighbouring nodes with linear weights.
    """
    h = b.period / n
    out = np.zeros(n)
    for atom in b.atoms:
        t = atom.position / h
        if mode == "lump":
            out[int(math.floor(t + 0.5)) % n] += atom.mass / h
        elif mode == "split":
            j = int(math.floor(t))
            theta = t - j
            out[j % n] += (1.0 - theta) * atom.mass / h
            out[(j + 1) % n] += theta * atom.mass / h
        else:
            raise InvalidParameterError(f"unknown atom mode {mode!r}")
    return out


def node_values(b: PeriodicCoefficient, n: int, atom_mode: str = "lump") -> FloatArray:
    """The discrete coefficient on the ``n``-point grid of one cell."""
    if n < MIN_SAMPLES:
        raise InvalidParameterError(f"grid needs at least {MIN_SAMPLES} points, got {n}")
    return continuous_node_values(b, n) + atom_node_weights(b, n, atom_mode)


def cell_grid(period: float, n: int) -> FloatArray:
    """Uniform nodes ``i * L / n`` of one cell."""
    return np.arange(n) * (period / n)


def _periodic_interp(samples: FloatArray, period: float, x: ArrayLike) -> FloatArray:
    n = samples.size
    xp = np.append(cell_grid(period, n), period)
    fp = np.append(samples, samples[0])
    return np.interp(np.mod(np.asarray(x, dtype=float), period), xp, fp)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def make_constant(alpha: float, period: float) -> PeriodicCoefficient:
    """The homogeneous coefficient ``b ≡ alpha`` as a one-segment step profile.

    A step body rather than samples, so constant coefficients take the exact
    transfer-matrix path; :func:`make_samples` gives the sampled form.
    """
    _check_positive("alpha", alpha)
    _check_positive("period", period)
    return make_piecewise(alpha, period, [0.0], [alpha])


def make_delta_comb(alpha: float, period: float) -> PeriodicCoefficient:
    """One atom of mass ``alpha * L`` at the cell centre."""
    _check_positive("alpha", alpha)
    _check_positive("period", period)
    return PeriodicCoefficient(
        period, alpha, AtomComb((Atom(0.5 * period, alpha * period),))
    )


def make_shigesada(
    alpha: float,
    period: float,
    fraction: float,
    contrast: Optional[float] = None,
) -> PeriodicCoefficient:
    """Two-level habitat: level ``b1`` on a centred zone of length ``f*L``, ``b2`` elsewhere.

    ``contrast`` is ``b1 / b2``; ``None`` (or infinity) means ``b2 = 0``.
    Levels are chosen so the mean is ``alpha``.
    """
    _check_positive("alpha", alpha)
    _check_positive("period", period)
    if not (0.0 < fraction <= 1.0):
        raise InvalidParameterError(f"fraction must lie in (0, 1], got {fraction!r}")
    if fraction == 1.0:
        return make_constant(alpha, period)
    if contrast is not None and contrast < 0:
        raise InvalidParameterError(f"contrast must be >= 0, got {contrast!r}")
    if contrast is None or math.isinf(contrast):
        b1, b2 = alpha / fraction, 0.0
    else:
        b2 = alpha / (fraction * contrast + 1.0 - fraction)
        b1 = contrast * b2
    start = 0.5 * period * (1.0 - fraction)
    end = 0.5 * period * (1.0 + fraction)
    # Round-off in b1*f*L + b2*(1-f)*L is far below the mass tolerance.
    return make_piecewise(alpha, period, [start, end], [b1, b2])


def make_piecewise(
    alpha: float, period: float, breakpoints: Sequence[float], levels: Sequence[float]
) -> PeriodicCoefficient:
    """A step profile; its mass must already equal ``alpha * L``."""
    return PeriodicCoefficient(period, alpha, PiecewiseConstant(np.asarray(breakpoints), np.asarray(levels)))


def make_samples(alpha: float, period: float, values: ArrayLike) -> PeriodicCoefficient:
    """Sampled profile rescaled so its trapezoid mass is ``alpha * L``."""
    _check_positive("alpha", alpha)
    _check_positive("period", period)
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < MIN_SAMPLES:
        raise InvalidParameterError(f"need at least {MIN_SAMPLES} samples")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise InvalidParameterError("samples must be finite and nonnegative")
    total = float(np.sum(v)) * period / v.size
    if total <= 0:
        raise InvalidParameterError("samples must have positive mass")
    scaled = v * (alpha * period / total)
    return PeriodicCoefficient(period, alpha, SmoothSamples(scaled))


def make_atoms(
    alpha: float, period: float, atoms: Sequence[Tuple[float, float]]
) -> PeriodicCoefficient:
    """General comb from ``(position, mass)`` pairs; masses must sum to ``alpha * L``."""
    return PeriodicCoefficient(
        period, alpha, AtomComb(tuple(Atom(float(p), float(m)) for p, m in atoms))
    )


def make_mixture(
    alpha: float,
    period: float,
    continuous: Continuous,
    atoms: Sequence[Tuple[float, float]],
) -> PeriodicCoefficient:
    """Continuous part plus atoms; total mass must equal ``alpha * L``."""
    return PeriodicCoefficient(
        period,
        alpha,
        Mixture(continuous, tuple(Atom(float(p), float(m)) for p, m in atoms)),
    )


def from_function(
    alpha: float, period: float, func: Callable[[FloatArray], ArrayLike], n: int = DEFAULT_SAMPLES
) -> PeriodicCoefficient:
    """Sample ``func`` on the cell grid and renormalize to mean ``alpha``."""
    return make_samples(alpha, period, func(cell_grid(period, n)))


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def rescale(b: PeriodicCoefficient, s: float) -> PeriodicCoefficient:
    """``x -> s^2 b(s x)``: period ``L/s``, mean ``s^2 alpha``.

    Atoms of mass ``m`` at ``p`` become atoms of mass ``s m`` at ``p / s``.
    """
    _check_positive("scale", s)
    period, alpha = b.period / s, b.alpha * s * s

    def _cont(cont: Continuous) -> Continuous:
        if isinstance(cont, SmoothSamples):
            return SmoothSamples(cont.values * s * s)
        return PiecewiseConstant(cont.breakpoints / s, cont.levels * s * s)

    atoms = tuple(Atom(a.position / s, a.mass * s) for a in b.atoms)
    body: Body
    if isinstance(b.body, AtomComb):
        body = AtomComb(atoms)
    elif isinstance(b.body, Mixture):
        body = Mixture(_cont(b.body.continuous), atoms)
    else:
        body = _cont(b.body)
    return PeriodicCoefficient(period, alpha, body)


def shift(b: PeriodicCoefficient, d: float) -> PeriodicCoefficient:
    """Translate the coefficient by ``d``: the new profile is ``b(x - d)``."""
    L = b.period

    def _cont(cont: Continuous) -> Continuous:
        if isinstance(cont, SmoothSamples):
            steps = d * cont.n / L
            k = int(round(steps))
            if abs(steps - k) > 1e-9:
                raise InvalidParameterError("sampled profiles shift by whole samples only")
            return SmoothSamples(np.roll(cont.values, k))
        moved = np.mod(cont.breakpoints + d, L)
        order = np.argsort(moved)
        return PiecewiseConstant(moved[order], cont.levels[order])

    atoms = tuple(Atom(float(np.mod(a.position + d, L)), a.mass) for a in b.atoms)
    body: Body
    if isinstance(b.body, AtomComb):
        body = AtomComb(atoms)
    elif isinstance(b.body, Mixture):
        body = Mixture(_cont(b.body.continuous), atoms)
    else:
        body = _cont(b.body)
    return PeriodicCoefficient(L, b.alpha, body)


def _atom_gap(b: PeriodicCoefficient) -> float:
    positions = [a.position for a in b.atoms]
    if len(positions) == 1:
        return b.period
    gaps = np.diff(positions + [positions[0] + b.period])
    return float(np.min(gaps))


def _kernel_cdf(spec: MollifierSpec, mass: float, x: FloatArray) -> FloatArray:
    w = 0.5 * spec.width
    if spec.kernel is Kernel.TRIANGLE:
        height = mass / w
        left = height * (x + w) ** 2 / (2.0 * w)
        right = mass - height * (w - x) ** 2 / (2.0 * w)
        return np.where(x <= -w, 0.0, np.where(x >= w, mass, np.where(x <= 0, left, right)))
    sigma = w / 3.0
    z = np.clip(x, -w, w) / (sigma * math.sqrt(2.0))
    edge = w / (sigma * math.sqrt(2.0))
    return mass * (erf(z) + erf(edge)) / (2.0 * erf(edge))


def mollify(
    b: PeriodicCoefficient, spec: MollifierSpec, n: int = DEFAULT_SAMPLES
) -> PeriodicCoefficient:
    """Replace every atom by a bump of equal mass and support width ``spec.width``.

    The triangle bump has half-width ``width/2`` and height ``2m/width``. Bumps
    are integrated exactly over the dual cells of the output grid, so the mass
    is preserved up to round-off.
    """
    if not b.has_atoms:
        raise UnsupportedInputError("coefficient has no atoms: nothing to mollify")
    gap = _atom_gap(b)
    if spec.width >= gap:
        raise KernelOverlapError(
            f"mollifier width {spec.width} must be below the minimal atom gap {gap}"
        )
    L = b.period
    h = L / n
    x = cell_grid(L, n)
    values = continuous_node_values(b, n)
    for atom in b.atoms:
        d = x - atom.position
        cell_mass = np.zeros(n)
        for k in (-1, 0, 1):
            cell_mass += _kernel_cdf(spec, atom.mass, d + k * L + 0.5 * h) - _kernel_cdf(
                spec, atom.mass, d + k * L - 0.5 * h
            )
        values = values + cell_mass / h
    return make_samples(b.alpha, L, values)


def weak_pairing(b: PeriodicCoefficient, eta: ArrayLike) -> float:
    """``∫_[0,L) b η``: trapezoid for the continuous part plus ``Σ m η(x_j)``.

    ``eta`` holds samples of an L-periodic test function on the uniform grid
    ``j * L / M``; it is interpolated linearly between samples.
    """
    eta_arr = np.asarray(eta, dtype=float)
    if eta_arr.ndim != 1 or eta_arr.size < 2:
        raise InvalidParameterError("test function needs at least 2 samples")
    L = b.period
    total = 0.0
    cont = b.continuous
    if isinstance(cont, SmoothSamples):
        if cont.n == eta_arr.size:
            eta_nodes = eta_arr
        else:
            eta_nodes = _periodic_interp(eta_arr, L, cell_grid(L, cont.n))
        total += float(np.dot(cont.values, eta_nodes)) * L / cont.n
    elif isinstance(cont, PiecewiseConstant):
        for start, end, level in segments(cont, L):
            ends = _linear_antiderivative(eta_arr, L, np.array([start, end]))
            total += level * float(ends[1] - ends[0])
    if b.atoms:
        pos = np.array([a.position for a in b.atoms])
        masses = np.array([a.mass for a in b.atoms])
        total += float(np.dot(masses, _periodic_interp(eta_arr, L, pos)))
    return total


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------


def describe(b: PeriodicCoefficient) -> str:
    """Short stable descriptor, used as a sweep row key."""
    head = f"{b.kind}(alpha={b.alpha:.6g},L={b.period:.6g}"
    cont = b.continuous
    if isinstance(cont, PiecewiseConstant):
        head += ",steps=" + "|".join(
            f"{s:.6g}:{lv:.6g}" for s, lv in zip(cont.breakpoints, cont.levels)
        )
    elif isinstance(cont, SmoothSamples):
        head += f",n={cont.n},max={float(np.max(cont.values)):.6g}"
    if b.atoms:
        head += ",atoms=" + "|".join(f"{a.position:.6g}:{a.mass:.6g}" for a in b.atoms)
    return head + ")"


def digest(b: PeriodicCoefficient) -> str:
    """Content hash used as provenance id."""
    h = hashlib.sha1()
    h.update(f"{b.kind}:{b.period!r}:{b.alpha!r}".encode())
    cont = b.continuous
    if isinstance(cont, SmoothSamples):
        h.update(cont.values.tobytes())
    elif isinstance(cont, PiecewiseConstant):
        h.update(cont.breakpoints.tobytes())
        h.update(cont.levels.tobytes())
    for a in b.atoms:
        h.update(f"{a.position!r}:{a.mass!r}".encode())
    return h.hexdigest()[:16]
