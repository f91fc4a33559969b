"""Tests for the Cauchy-problem solvers."""

import math

import numpy as np
import pytest

from kppfront.core.coeff import make_constant
from kppfront.core.pde import (
    SimulationConfig,
    continuous_dependence_probe,
    default_initial_data,
    duhamel_bound,
    gronwall_bound,
    heat_kernel,
    level_crossings,
    simulate,
    spatial_grid,
    step_duhamel,
    step_strang,
    write_front_csv,
    write_heatmap_svg,
    write_snapshots,
)
from kppfront.exceptions import InvalidParameterError, StabilityError

DX = 1.0 / 16.0
DT = 2.0 * DX * DX


def small(**overrides) -> SimulationConfig:
    values = {"half_width": 20.0, "dx": DX, "dt": DT, "t_end": 1.0, "snapshot_every": 0.25}
    values.update(overrides)
    return SimulationConfig(**values)


def test_zero_is_fixed(half_patch):
    grid = spatial_grid(half_patch, 20.0, DX)
    np.testing.assert_array_equal(step_strang(np.zeros(grid.n), half_patch, DT, grid), 0.0)
    np.testing.assert_array_equal(step_duhamel(np.zeros(grid.n), half_patch, DT, grid), 0.0)


def test_one_is_fixed_with_neumann(half_patch):
    grid = spatial_grid(half_patch, 20.0, DX)
    out = step_strang(np.ones(grid.n), half_patch, DT, grid, boundary="neumann")
    np.testing.assert_allclose(out, 1.0, atol=1e-12)


def test_flat_data_follow_logistic_ode():
    b = make_constant(1.0, 2.0)
    grid = spatial_grid(b, 40.0, 0.125)
    dt = 0.01
    out = step_strang(np.full(grid.n, 0.5), b, dt, grid, boundary="neumann")
    expected = 0.5 * math.exp(dt) / (1.0 + 0.5 * math.expm1(dt))
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_step_limits(constant, half_patch):
    grid = spatial_grid(half_patch, 20.0, DX)
    u = default_initial_data(grid)
    with pytest.raises(StabilityError):
        step_strang(u, half_patch, 2.5 * DX * DX, grid)
    with pytest.raises(StabilityError):
        step_duhamel(u, constant, 2.0, grid)
    with pytest.raises(InvalidParameterError):
        step_strang(u[:-1], half_patch, DT, grid)
    with pytest.raises(InvalidParameterError):
        step_strang(-u, half_patch, DT, grid)


def test_range_preserved_with_atoms(comb, half_patch):
    for b in (comb, half_patch):
        trace = simulate(b, cfg=small(t_end=2.0))
        assert trace.snapshots.min() >= -1e-12
        assert trace.snapshots.max() <= 1.0 + 1e-10
        assert trace.sup_norm[-1] > 0.9


def test_comparison_principle(half_patch):
    cfg = small(t_end=0.5)
    grid = cfg.validate_for(half_patch)
    rng = np.random.default_rng(3)
    envelope = np.exp(-(grid.x**2) / 4.0)
    for _ in range(20):
        lower = rng.uniform(0.0, 1.0, grid.n) * envelope
        upper = np.minimum(lower + rng.uniform(0.0, 0.5, grid.n) * envelope, 1.0)
        u = simulate(half_patch, lower, cfg).final
        v = simulate(half_patch, upper, cfg).final
        assert np.all(u <= v + 1e-12)


def test_translation_by_one_period(two_atoms):
    cfg = small(t_end=1.0)
    grid = cfg.validate_for(two_atoms)
    shift = grid.cell_nodes
    assert shift == 16
    u0 = np.exp(-4.0 * grid.x**2)
    v0 = np.exp(-4.0 * (grid.x - 1.0) ** 2)
    u = simulate(two_atoms, u0, cfg).final
    v = simulate(two_atoms, v0, cfg).final
    interior = np.flatnonzero(np.abs(grid.x) < 10.0)
    np.testing.assert_allclose(v[interior + shift], u[interior], atol=1e-10)


def test_contamination_flag(constant):
    clean = simulate(constant, cfg=small(t_end=2.0))
    assert not clean.contaminated
    assert clean.clean_until() == pytest.approx(2.0)
    dirty = simulate(constant, cfg=small(t_end=10.0))
    assert dirty.contaminated
    assert dirty.contaminated_at < 10.0
    assert dirty.clean_until() == dirty.contaminated_at


def test_trace_shape_and_readonly(constant):
    trace = simulate(constant, cfg=small(t_end=1.0))
    assert trace.times.tolist() == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert trace.snapshots.shape == (5, trace.x.size)
    assert trace.front_pos.shape == (5, 3)
    assert trace.steps == 128
    with pytest.raises(ValueError):
        trace.snapshots[0, 0] = 1.0


def test_continuous_dependence_within_gronwall(constant):
    cfg = small()
    grid = cfg.validate_for(constant)
    u0 = default_initial_data(grid)
    bump = np.clip(1.0 - np.abs(grid.x), 0.0, None)
    v0 = np.clip(u0 + 0.01 * bump, 0.0, 1.0)
    ratio = continuous_dependence_probe(constant, u0, v0, 1.0, cfg)
    assert 0.0 < ratio <= math.e * (1.0 + 1e-6)
    with pytest.raises(InvalidParameterError):
        continuous_dependence_probe(constant, u0, u0, 1.0, cfg)
    with pytest.raises(InvalidParameterError):
        continuous_dependence_probe(constant, u0, v0, 0.0, cfg)


def test_bounds():
    assert gronwall_bound(1.0, 1.0) == pytest.approx(math.e)
    assert duhamel_bound(0.0, 3.0) == 1.0
    assert duhamel_bound(2.0, 1.0) == pytest.approx(math.e * (1.0 + 2.0 / math.sqrt(math.pi)))


def test_level_crossings():
    x = np.linspace(-2.0, 2.0, 9)
    u = np.clip(1.0 - np.abs(x), 0.0, None)
    right, left = level_crossings(x, u, 0.5)
    assert right == pytest.approx(0.5)
    assert left == pytest.approx(-0.5)
    assert all(math.isnan(v) for v in level_crossings(x, 0.1 * u, 0.5))


def test_heat_kernel_normalized():
    kernel = heat_kernel(DX, DT)
    assert kernel.sum() == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(kernel, kernel[::-1])


def test_duhamel_front_matches_strang(constant):
    strang = simulate(constant, cfg=small(t_end=5.0))
    duhamel = simulate(constant, cfg=small(t_end=5.0, scheme="duhamel"))
    assert duhamel.front_pos[-1, 1] == pytest.approx(strang.front_pos[-1, 1], abs=0.1)
    assert duhamel.front_pos[-1, 2] == pytest.approx(strang.front_pos[-1, 2], abs=0.1)


def test_writers(constant, tmp_path):
    trace = simulate(constant, cfg=small(t_end=0.5))
    csv_path = write_front_csv(trace, tmp_path / "out" / "fronts.csv")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,x_plus,x_minus,sup_norm"
    assert len(lines) == 1 + trace.times.size

    npz = np.load(write_snapshots(trace, tmp_path / "snaps.npz"))
    np.testing.assert_array_equal(npz["snapshots"], trace.snapshots)

    svg = write_heatmap_svg(trace, tmp_path / "heat.svg").read_text()
    assert "<svg" in svg


def test_grid_validation(constant):
    with pytest.raises(InvalidParameterError):
        small(half_width=15.0).validate_for(constant)
    with pytest.raises(InvalidParameterError):
        small(dx=0.1, dt=0.01).validate_for(constant)
    with pytest.raises(InvalidParameterError):
        small(dx=0.3, dt=0.1).validate_for(constant)
    with pytest.raises(InvalidParameterError):
        small(half_width=20.5).validate_for(constant)


def test_config_presets():
    ref = SimulationConfig.reference()
    assert ref.dx == 1.0 / 64.0
    assert ref.dt == pytest.approx(2.0 / 4096.0)
    assert ref.half_width == 160.0
    assert ref.t_end == 60.0
    assert SimulationConfig.quick(2.0).dx == 1.0 / 16.0
    assert SimulationConfig.quick(t_end=5.0).t_end == 5.0
    with pytest.raises(ValueError):
        SimulationConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimulationConfig(theta=1.0)
