"""Tests for coefficient construction, quadrature and mollification."""

import math

import numpy as np
import pytest

from kppfront.core.coeff import (
    Kernel,
    MollifierSpec,
    PiecewiseConstant,
    SmoothSamples,
    atom_node_weights,
    describe,
    digest,
    from_function,
    make_atoms,
    make_constant,
    make_delta_comb,
    make_mixture,
    make_piecewise,
    make_samples,
    make_shigesada,
    mollify,
    node_values,
    rescale,
    shift,
    weak_pairing,
)
from kppfront.exceptions import (
    InvalidParameterError,
    KernelOverlapError,
    UnsupportedInputError,
)


def test_make_constant():
    b = make_constant(1.0, 1.0)
    assert b.cell_mass() == pytest.approx(1.0, rel=1e-12)
    assert b.is_exact
    assert isinstance(b.body, PiecewiseConstant)
    assert not b.has_atoms
    assert make_constant(2.0, 0.5).cell_mass() == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(node_values(b, 64), 1.0, rtol=1e-12)


@pytest.mark.parametrize("alpha,period", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.nan, 1.0)])
def test_make_constant_rejects(alpha, period):
    with pytest.raises(InvalidParameterError):
        make_constant(alpha, period)


def test_make_delta_comb():
    b = make_delta_comb(3.0, 2.0)
    assert len(b.atoms) == 1
    assert b.atoms[0].position == 1.0
    assert b.atoms[0].mass == 6.0
    assert make_delta_comb(1.0, 1.0).cell_mass() == 1.0


def test_make_shigesada_levels():
    b = make_shigesada(1.0, 1.0, 0.5)
    assert isinstance(b.body, PiecewiseConstant)
    np.testing.assert_allclose(b.body.breakpoints, [0.25, 0.75])
    np.testing.assert_allclose(b.body.levels, [2.0, 0.0])

    quarter = make_shigesada(1.0, 1.0, 0.25)
    assert quarter.body.levels[0] == pytest.approx(4.0)

    finite = make_shigesada(1.0, 1.0, 0.5, 4.0)
    np.testing.assert_allclose(finite.body.levels, [1.6, 0.4])
    assert finite.cell_mass() == pytest.approx(1.0, rel=1e-12)


def test_make_shigesada_full_fraction_is_constant():
    b = make_shigesada(1.0, 1.0, 1.0, 3.0)
    np.testing.assert_allclose(node_values(b, 32), 1.0)


@pytest.mark.parametrize("fraction,contrast", [(0.0, None), (1.5, None), (0.5, -1.0)])
def test_make_shigesada_rejects(fraction, contrast):
    with pytest.raises(InvalidParameterError):
        make_shigesada(1.0, 1.0, fraction, contrast)


def test_mass_invariant_enforced():
    with pytest.raises(InvalidParameterError):
        make_piecewise(1.0, 1.0, [0.0, 0.5], [1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        make_atoms(1.0, 1.0, [(0.5, 0.9)])


def test_atoms_must_be_inside_cell():
    with pytest.raises(InvalidParameterError):
        make_atoms(1.0, 1.0, [(0.0, 1.0)])
    with pytest.raises(InvalidParameterError):
        make_atoms(1.0, 1.0, [(0.5, 0.5), (0.5, 0.5)])


def test_make_samples_renormalizes():
    b = make_samples(2.0, 1.0, np.linspace(1.0, 3.0, 64))
    assert isinstance(b.body, SmoothSamples)
    assert b.cell_mass() == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        make_samples(1.0, 1.0, np.ones(8))
    with pytest.raises(InvalidParameterError):
        make_samples(1.0, 1.0, -np.ones(32))


def test_mixture_mass():
    cont = PiecewiseConstant(np.array([0.0, 1.0]), np.array([0.5, 0.25]))
    b = make_mixture(1.0, 2.0, cont, [(0.5, 0.75), (1.5, 0.5)])
    assert b.cell_mass() == pytest.approx(2.0, rel=1e-12)
    assert b.is_exact
    assert [a.position for a in b.atoms] == [0.5, 1.5]


@pytest.mark.parametrize("mode", ["lump", "split"])
def test_node_values_conserve_mass(mode, smooth, half_patch, two_atoms):
    for b in (smooth, half_patch, two_atoms):
        n = 200
        assert np.sum(node_values(b, n, mode)) * b.period / n == pytest.approx(1.0, rel=1e-12)


def test_atom_node_weights_lump_and_split():
    b = make_atoms(1.0, 1.0, [(0.3, 1.0)])
    lump = atom_node_weights(b, 10, "lump")
    assert lump[3] == pytest.approx(10.0)
    split = atom_node_weights(make_atoms(1.0, 1.0, [(0.325, 1.0)]), 10, "split")
    assert split[3] == pytest.approx(7.5)
    assert split[4] == pytest.approx(2.5)
    with pytest.raises(InvalidParameterError):
        atom_node_weights(b, 10, "spread")


def test_mollify_triangle_bump(comb):
    b = mollify(comb, MollifierSpec(0.1, Kernel.TRIANGLE), 1024)
    assert isinstance(b.body, SmoothSamples)
    values = b.body.values
    assert int(np.argmax(values)) == 512
    # half-width 0.05 and height 2m/width
    assert values.max() == pytest.approx(20.0, abs=0.2)
    assert np.all(values[np.abs(np.arange(1024) / 1024 - 0.5) > 0.06] == 0.0)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
@pytest.mark.parametrize("kernel", list(Kernel))
def test_mollify_conserves_mass(comb, eps, kernel):
    b = mollify(comb, MollifierSpec(eps, kernel))
    assert abs(b.cell_mass() - comb.cell_mass()) <= 1e-12


def test_mollify_errors(constant, two_atoms):
    with pytest.raises(UnsupportedInputError):
        mollify(constant, MollifierSpec(0.1))
    with pytest.raises(KernelOverlapError):
        mollify(two_atoms, MollifierSpec(0.3))
    with pytest.raises(InvalidParameterError):
        MollifierSpec(0.0)


def test_weak_pairing_examples(constant, comb, half_patch):
    x = np.arange(100) / 100
    assert weak_pairing(constant, np.ones(100)) == pytest.approx(1.0, rel=1e-12)
    assert weak_pairing(comb, x) == pytest.approx(0.5, rel=1e-12)
    assert weak_pairing(half_patch, np.ones(37)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        weak_pairing(comb, [1.0])


def test_mollified_comb_converges_weak_star(comb):
    n = 1024
    eta = np.cos(2.0 * np.pi * np.arange(n) / n)
    target = weak_pairing(comb, eta)
    assert target == pytest.approx(-1.0, rel=1e-12)
    errors = [
        abs(weak_pairing(mollify(comb, MollifierSpec(eps), n), eta) - target)
        for eps in (0.2, 0.1, 0.05, 0.025)
    ]
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    assert errors[-1] < 1e-3


def test_shift_preserves_pairing(two_atoms, half_patch):
    m = 1000
    x = np.arange(m) / m

    def eta(t):
        return np.cos(2.0 * np.pi * t) + 0.3 * np.sin(4.0 * np.pi * t)

    for b in (two_atoms, half_patch):
        moved = shift(b, 0.5)
        assert weak_pairing(moved, eta(x - 0.5)) == pytest.approx(
            weak_pairing(b, eta(x)), abs=1e-12
        )


def test_shift_positions(two_atoms):
    moved = shift(two_atoms, 0.5)
    assert [a.position for a in moved.atoms] == pytest.approx([0.05, 0.8])
    with pytest.raises(InvalidParameterError):
        shift(make_delta_comb(1.0, 1.0), 0.5)


def test_rescale(half_patch, comb):
    b = rescale(half_patch, 2.0)
    assert b.period == 0.5
    assert b.alpha == 4.0
    np.testing.assert_allclose(b.body.breakpoints, [0.125, 0.375])
    np.testing.assert_allclose(b.body.levels, [8.0, 0.0])
    c = rescale(comb, 2.0)
    assert c.atoms[0].position == 0.25
    assert c.atoms[0].mass == 2.0


def test_from_function_mean():
    b = from_function(1.5, 2.0, lambda x: 2.0 + np.sin(np.pi * x), n=128)
    assert b.cell_mass() == pytest.approx(3.0, rel=1e-12)


def test_describe_and_digest(comb, two_atoms):
    assert describe(comb).startswith("AtomComb(alpha=1,L=1")
    assert digest(comb) == digest(make_delta_comb(1.0, 1.0))
    assert digest(comb) != digest(two_atoms)
    assert len(digest(comb)) == 16
