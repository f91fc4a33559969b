"""Tests for transfer matrices and the dispersion relation."""

import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from kppfront.core.coeff import (
    PiecewiseConstant,
    make_constant,
    make_mixture,
    make_samples,
    make_shigesada,
    shift,
)
from kppfront.core.eigen import SolverConfig, eigenvalue_band, principal_eigenpair_fd
from kppfront.core.floquet import (
    atom_jump,
    dispersion_curve,
    dispersion_mu,
    dispersion_root,
    eigenfunction,
    floquet_eigenpair,
    interval_propagator,
    monodromy,
    pieces,
)
from kppfront.exceptions import InvalidParameterError, UnsupportedInputError


def test_free_propagator():
    np.testing.assert_allclose(interval_propagator(0.0, 1.0, 0.0, 0.0), [[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_allclose(
        interval_propagator(1.0, 1.0, 0.0, -1.0), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15
    )


@pytest.mark.parametrize(
    "level,length,lam,mu", [(0.0, 0.7, 0.4, -0.3), (2.0, 0.25, -1.1, -1.5), (1.0, 1.0, 0.5, -1.25)]
)
def test_propagator_determinant(level, length, lam, mu):
    m = interval_propagator(level, length, lam, mu)
    assert np.linalg.det(m) == pytest.approx(math.exp(2.0 * lam * length), rel=1e-12)


def test_propagator_regimes_agree_with_ode():
    """Closed forms match the matrix exponential in all three root regimes."""
    for level, lam, mu in [(0.0, 1.0, -0.5), (3.0, 0.2, -1.0), (1.0, 0.5, -0.75)]:
        companion = np.array([[0.0, 1.0], [-(mu + level), 2.0 * lam]])
        np.testing.assert_allclose(
            interval_propagator(level, 0.6, lam, mu), expm(0.6 * companion), rtol=1e-12, atol=1e-13
        )


def test_propagator_rejects_empty_segment():
    with pytest.raises(InvalidParameterError):
        interval_propagator(1.0, 0.0, 0.0, 0.0)


def test_atom_jump():
    np.testing.assert_array_equal(atom_jump(1.0), [[1.0, 0.0], [-1.0, 1.0]])
    for m in (0.1, 1.0, 10.0):
        assert np.linalg.det(atom_jump(m)) == pytest.approx(1.0)
    np.testing.assert_allclose(atom_jump(0.3) @ atom_jump(0.9), atom_jump(1.2))
    with pytest.raises(InvalidParameterError):
        atom_jump(-1.0)


def test_pieces_cut_at_atoms():
    cont = PiecewiseConstant(np.array([0.0, 1.0]), np.array([0.5, 0.25]))
    b = make_mixture(1.0, 2.0, cont, [(0.5, 0.75), (1.5, 0.5)])
    parts = pieces(b)
    assert [p.start for p in parts] == [0.0, 0.5, 1.0, 1.5]
    assert [p.level for p in parts] == [0.5, 0.5, 0.25, 0.25]
    assert [p.jump for p in parts] == [0.0, 0.75, 0.0, 0.5]
    assert sum(p.length for p in parts) == pytest.approx(2.0)


def test_abel_identity_on_random_configurations():
    rng = np.random.default_rng(11)
    for _ in range(25):
        bp = np.sort(rng.uniform(0.0, 1.0, 3))
        bp[0] = 0.0
        levels = rng.uniform(0.0, 1.0, 3)
        cont = PiecewiseConstant(bp, levels)
        mass = sum(lv * ln for lv, ln in zip(levels, np.diff(np.append(bp, 1.0))))
        position = float(rng.uniform(0.05, 0.95))
        if np.min(np.abs(bp - position)) < 1e-3:
            continue
        b = make_mixture(mass + 0.6, 1.0, cont, [(position, 0.6)])
        lam = float(rng.uniform(-1.0, 1.0))
        mu = float(rng.uniform(-2.0, -1.0))
        m = monodromy(b, lam, mu)
        assert m.det == pytest.approx(m.expected_det, rel=1e-11)


def test_constant_root(constant):
    assert dispersion_mu(constant, 0.7) == pytest.approx(-1.0, abs=1e-12)
    assert dispersion_mu(constant, 0.0) == pytest.approx(-1.0, abs=1e-6)


def test_comb_root_at_zero_drift(comb):
    # mu = -k^2 with 2k tanh(k/2) = 1 for mass 1 on a unit cell
    k = brentq(lambda s: 2.0 * s * math.tanh(0.5 * s) - 1.0, 0.1, 2.0, xtol=1e-15)
    assert dispersion_mu(comb, 0.0) == pytest.approx(-k * k, abs=1e-10)


def test_comb_root_matches_fd(comb):
    fd = principal_eigenpair_fd(comb, 0.0, SolverConfig(grid_n=4096)).mu
    assert dispersion_mu(comb, 0.0) == pytest.approx(fd, abs=2e-4)


def test_half_patch_root(half_patch):
    root = dispersion_root(half_patch, 1.0)
    low, high = eigenvalue_band(half_patch)
    assert low <= root.mu <= high
    assert root.residual < 1e-10
    fd = principal_eigenpair_fd(half_patch, 1.0, SolverConfig(grid_n=4096)).mu
    assert root.mu == pytest.approx(fd, abs=2e-4)


def test_single_sign_change_in_band(half_patch, two_atoms):
    for b in (half_patch, two_atoms):
        low, high = eigenvalue_band(b)
        grid = np.arange(low - 0.5, high + 0.5, 1e-3)
        values = np.array([monodromy(b, 0.8, mu).dispersion for mu in grid])
        assert np.count_nonzero(np.sign(values[1:]) != np.sign(values[:-1])) == 1


def test_frame_invariance(two_atoms):
    moved = shift(two_atoms, 0.1)
    for lam in (0.0, 0.9):
        a = monodromy(two_atoms, lam, -1.3)
        c = monodromy(moved, lam, -1.3)
        assert c.trace == pytest.approx(a.trace, rel=1e-12)
        assert dispersion_mu(moved, lam) == pytest.approx(dispersion_mu(two_atoms, lam), abs=1e-11)


def test_eigenfunction_positive(two_atoms):
    mu = dispersion_mu(two_atoms, 1.2)
    x, psi = eigenfunction(two_atoms, 1.2, mu)
    assert np.all(psi > 0)
    assert psi.max() == pytest.approx(1.0)
    assert x.size == 64 * len(pieces(two_atoms))


def test_floquet_eigenpair(two_atoms):
    pair = floquet_eigenpair(two_atoms, 0.6, 512)
    assert pair.method == "floquet"
    assert pair.psi.size == 512
    assert pair.mu == pytest.approx(dispersion_mu(two_atoms, 0.6))
    assert pair.psi.max() == 1.0


def test_sampled_coefficient_rejected():
    b = make_samples(1.0, 1.0, np.linspace(0.5, 1.5, 64))
    with pytest.raises(UnsupportedInputError):
        dispersion_mu(b, 0.5)


def test_dispersion_curve_properties(constant, comb):
    flat = dispersion_curve(constant, np.linspace(0.0, 2.0, 9))
    np.testing.assert_allclose(flat.mus[1:], -1.0, atol=1e-12)
    assert not flat.failures

    lams = np.linspace(0.1, 2.0, 8)
    plus = dispersion_curve(comb, lams, workers=2)
    minus = dispersion_curve(comb, -lams[::-1])
    np.testing.assert_allclose(plus.mus, minus.mus[::-1], atol=1e-10)
    assert np.all(plus.mus >= dispersion_mu(comb, 0.0) - 1e-12)
    assert [row[0] for row in plus.rows()] == pytest.approx(list(lams))


def test_dispersion_curve_records_failures():
    b = make_samples(1.0, 1.0, np.linspace(0.5, 1.5, 64))
    curve = dispersion_curve(b, [0.0, 0.5, 1.0])
    assert len(curve.failures) == 3
    assert np.all(np.isnan(curve.mus))
    with pytest.raises(InvalidParameterError):
        dispersion_curve(b, [1.0, 0.5])


def test_shigesada_roots_in_band():
    for fraction in (0.5, 0.25, 0.125):
        b = make_shigesada(1.0, 1.0, fraction)
        low, high = eigenvalue_band(b)
        for lam in (0.0, 1.0, 2.5):
            assert low - 1e-12 <= dispersion_mu(b, lam) <= high + 1e-12


def test_constant_exact_for_other_periods():
    b = make_constant(4.0, 2.0)
    assert dispersion_mu(b, 1.3) == pytest.approx(-4.0, abs=1e-11)
