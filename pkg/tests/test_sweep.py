"""Tests for coefficient-family sweeps."""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from sqlalchemy import func, select

from kppfront.core.coeff import make_constant
from kppfront.core.eigen import SolverConfig, eigenvalue_band
from kppfront.core.speed import bounds
from kppfront.core.sweep import (
    CSV_COLUMNS,
    SweepPlan,
    SweepRecord,
    convergence_table,
    fourier_profile,
    plan_rows,
    run_sweep,
    summarize,
    store_records,
    sup_deviation,
    write_csv,
    write_scatter_svg,
)
from kppfront.exceptions import UnsupportedInputError
from kppfront.models.base import create_db_engine, init_db, session_factory
from kppfront.models.sweep_record import SweepRecord as SweepRecordRow
from kppfront.utils.metrics import get_metrics_tracker


@pytest.fixture
def coarse_cfg() -> SolverConfig:
    return SolverConfig(grid_n=256, lambda_tol=1e-5)


def random_plan(tmp_path=None, **overrides) -> SweepPlan:
    values = {"family": "fourier_random", "seed": 7, "count": 10, "samples": 256}
    if tmp_path is not None:
        values["output"] = tmp_path / "sweep.csv"
    values.update(overrides)
    return SweepPlan(**values)


def test_shigesada_sweep():
    plan = SweepPlan(family="shigesada", fractions=(0.5, 0.25), contrasts=(None, 4.0))
    records = run_sweep(plan)
    assert [r.index for r in records] == [0, 1, 2, 3]
    assert all(r.ok for r in records)
    assert all(r.method == "floquet" for r in records)
    assert all(r.gap_to_h > 0 for r in records)
    assert summarize(records).ok
    summary = records[0].mu_curve_summary
    assert summary == {"mu_zero": records[0].mu_zero, "mu_star": records[0].mu_star}
    assert summary["mu_zero"] <= summary["mu_star"] <= -1.0 + 1e-9


def test_shigesada_periods():
    plan = SweepPlan(family="shigesada", fractions=(0.5,), periods=(0.5, 1.0, 2.0))
    records = run_sweep(plan)
    assert [r.period for r in records] == [0.5, 1.0, 2.0]
    # finer fragmentation spreads slower
    speeds = [r.c_star for r in records]
    assert speeds[0] < speeds[1] < speeds[2]


def test_mollified_comb_closes_gap():
    plan = SweepPlan(family="mollified_comb", eps_grid=(0.1, 0.05, 0.025), method="fd")
    records = run_sweep(plan, SolverConfig(grid_n=1024, lambda_tol=1e-5))
    assert all(r.ok for r in records)
    assert abs(records[-1].gap_to_h) <= 1e-2
    assert records[-1].sup_deviation > records[0].sup_deviation


def test_random_sweep_is_reproducible(tmp_path, coarse_cfg):
    first = run_sweep(random_plan(tmp_path), coarse_cfg)
    text = (tmp_path / "sweep.csv").read_text()
    second = run_sweep(random_plan(tmp_path), coarse_cfg)
    assert (tmp_path / "sweep.csv").read_text() == text
    assert [r.c_star for r in first] == [r.c_star for r in second]

    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 11
    low, high = bounds(1.0, 1.0)
    for r in first:
        assert r.ok
        assert r.method == "fd"
        assert low - 1e-3 <= r.c_star <= high + 1e-3
        assert r.gap_to_h >= 1e-4
        assert r.mu_zero <= -1.0 + 1e-6
    assert get_metrics_tracker().sweep_metrics.rows == 20


def test_random_sweep_with_workers_keeps_order(coarse_cfg):
    serial = run_sweep(random_plan(count=4), coarse_cfg)
    threaded = run_sweep(random_plan(count=4, workers=3), coarse_cfg)
    assert [r.index for r in threaded] == [0, 1, 2, 3]
    assert [r.c_star for r in threaded] == [r.c_star for r in serial]


def test_floquet_on_samples_records_failures(coarse_cfg):
    records = run_sweep(random_plan(count=3, method="floquet"), coarse_cfg)
    assert all(not r.ok for r in records)
    assert all(r.error.startswith("UnsupportedInputError") for r in records)
    assert all(math.isnan(r.c_star) for r in records)
    summary = summarize(records)
    assert summary.failed == 3
    assert not summary.ok
    assert get_metrics_tracker().sweep_metrics.failed_rows == 3


def test_summary_flags_violations():
    good = SweepRecord(0, "x", "d", 1.0, 1.0, "fd", c_star=2.1, gap_to_h=0.1)
    negative_gap = SweepRecord(1, "x", "d", 1.0, 1.0, "fd", c_star=2.1, gap_to_h=-1e-3)
    out_of_band = SweepRecord(2, "x", "d", 1.0, 1.0, "fd", c_star=3.5, gap_to_h=0.0)
    summary = summarize([good, negative_gap, out_of_band])
    assert summary.gap_violations == (1,)
    assert summary.band_violations == (2,)
    assert summary.failed == 0


def test_fourier_profile_mean_and_sign():
    rng = np.random.default_rng(0)
    b = fourier_profile(rng, 2.0, 1.5, 128, 6, 3.0, 1.0, 1.0)
    assert b.cell_mass() == pytest.approx(3.0, rel=1e-12)
    assert np.all(b.body.values >= 0.0)


def test_plan_rows_deterministic():
    a = plan_rows(random_plan(count=3))
    b = plan_rows(random_plan(count=3))
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.coefficient.body.values, rb.coefficient.body.values)


def test_plan_validation():
    with pytest.raises(ValidationError):
        SweepPlan(family="shigesada", fractions=(0.0,))
    with pytest.raises(ValidationError):
        SweepPlan(family="mollified_comb", eps_grid=())
    with pytest.raises(ValidationError):
        SweepPlan(family="cosine")
    with pytest.raises(ValidationError):
        SweepPlan(family="fourier_random", count=0)


def test_sup_deviation(comb, half_patch):
    assert sup_deviation(comb) == math.inf
    assert sup_deviation(half_patch) == pytest.approx(1.0)
    assert sup_deviation(make_constant(1.0, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_store_records():
    engine = create_db_engine("sqlite:///:memory:")
    init_db(engine)
    records = [
        SweepRecord(0, "shigesada", "a", 1.0, 1.0, "floquet", c_star=2.2, gap_to_h=0.1),
        SweepRecord(1, "shigesada", "b", 1.0, 1.0, "floquet", error="BracketEscapeError: edge"),
    ]
    with session_factory(engine)() as session:
        run_id = store_records(records, session, run_id="run-1")
        assert run_id == "run-1"
        rows = session.scalars(select(SweepRecordRow).order_by(SweepRecordRow.row_index)).all()
        assert [r.row_index for r in rows] == [0, 1]
        assert rows[0].c_star == 2.2
        assert rows[1].c_star is None
        assert rows[1].error.startswith("BracketEscapeError")
        store_records(records[:1], session)
        assert session.scalar(select(func.count()).select_from(SweepRecordRow)) == 3


def test_writers(tmp_path):
    records = [
        SweepRecord(0, "x", "d", 1.0, 1.0, "fd", c_star=2.2, gap_to_h=0.1, wall_time=3.0),
        SweepRecord(1, "x", "d", 1.0, 1.0, "fd", error="IterationLimitError: slow"),
    ]
    lines = write_csv(records, tmp_path / "deep" / "rows.csv").read_text().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert "3.0" not in lines[1].split(",")
    assert lines[2].endswith("IterationLimitError: slow")
    assert lines[2].split(",")[6] == "nan"
    assert "<svg" in write_scatter_svg(records, tmp_path / "scatter.svg").read_text()


def test_convergence_table(comb, two_atoms, constant):
    cfg = SolverConfig(grid_n=512, lambda_tol=1e-5)
    table = convergence_table(comb, (0.2, 0.1), cfg, samples=512)
    assert [row.eps for row in table] == [0.2, 0.1]
    assert all(math.isnan(row.c_negative) for row in table)
    assert abs(table[-1].gap) < abs(table[0].gap) + 1e-3

    sym = convergence_table(two_atoms, (0.1,), cfg, samples=512, check_symmetry=True)
    assert sym[0].c_negative == pytest.approx(sym[0].c_mollified, abs=1e-5)

    with pytest.raises(UnsupportedInputError):
        convergence_table(constant, (0.1,), cfg)


@pytest.mark.slow
def test_random_ensemble_properties():
    plan = SweepPlan(family="fourier_random", seed=3, count=200)
    records = run_sweep(plan, SolverConfig(grid_n=512, lambda_tol=1e-5))
    low, high = bounds(1.0, 1.0)
    band = eigenvalue_band(make_constant(1.0, 1.0))
    for r in records:
        assert r.ok, r.error
        assert r.method == "fd"
        assert low - 1e-6 <= r.c_star <= high + 1e-3
        for mu in (r.mu_zero, r.mu_star):
            assert band[0] <= mu <= band[1] + 1e-6
        # mu is smallest at zero drift
        assert r.mu_star >= r.mu_zero - 1e-9
        if r.sup_deviation >= 0.5:
            assert r.c_star > 2.0 + 1e-4
        assert r.gap_to_h >= 1e-4
    assert summarize(records).ok
