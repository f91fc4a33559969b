"""Tests for the process-wide metrics tracker."""

import threading

from kppfront.utils.metrics import MetricsTracker, get_metrics_tracker, log_metrics_summary


def test_counters():
    tracker = MetricsTracker()
    tracker.record_eigensolve("fd", 12)
    tracker.record_eigensolve("evolution", 30)
    tracker.record_floquet_root()
    tracker.record_fallback()
    tracker.record_eigen_failure()
    tracker.record_simulation(100, contaminated=True)
    tracker.record_sweep_row(False, 0.5)
    summary = tracker.get_summary()
    assert summary["eigen"] == {
        "fd_solves": 1,
        "evolution_solves": 1,
        "floquet_roots": 1,
        "iterations": 42,
        "fallbacks": 1,
        "failures": 1,
    }
    assert summary["simulation"]["contaminated_runs"] == 1
    assert summary["sweep"] == {"rows": 1, "failed_rows": 1, "wall_time_seconds": 0.5}
    assert summary["runtime_seconds"] >= 0.0


def test_reset():
    tracker = MetricsTracker()
    tracker.record_sweep_row(True, 1.0)
    tracker.reset()
    assert tracker.sweep_metrics.rows == 0


def test_thread_safe_updates():
    tracker = MetricsTracker()

    def work():
        for _ in range(1000):
            tracker.record_eigensolve("fd", 1)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert tracker.eigen_metrics.fd_solves == 8000
    assert tracker.eigen_metrics.iterations == 8000


def test_global_tracker_is_shared():
    assert get_metrics_tracker() is get_metrics_tracker()
    get_metrics_tracker().record_floquet_root()
    log_metrics_summary()
    assert get_metrics_tracker().eigen_metrics.floquet_roots == 1
