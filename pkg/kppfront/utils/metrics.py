"""Metrics tracking for solver, simulation and sweep runs."""

import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Any, Dict, Optional

from kppfront.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class EigenMetrics:
    """Eigensolver metrics."""

    fd_solves: int = 0
    evolution_solves: int = 0
    floquet_roots: int = 0
    iterations: int = 0
    fallbacks: int = 0
    failures: int = 0


@dataclass
class SimulationMetrics:
    """Cauchy-problem simulation metrics."""

    simulations: int = 0
    steps: int = 0
    contaminated_runs: int = 0


@dataclass
class SweepMetrics:
    """Batch sweep metrics."""

    rows: int = 0
    failed_rows: int = 0
    wall_time_seconds: float = 0.0


class MetricsTracker:
    """Tracks counters for a process; safe to update from worker threads."""

    def __init__(self) -> None:
        """Initialize the metrics tracker."""
        self.eigen_metrics = EigenMetrics()
        self.simulation_metrics = SimulationMetrics()
        self.sweep_metrics = SweepMetrics()
        self.start_time = time.time()
        self._lock = threading.Lock()

    def record_eigensolve(self, method: str, iterations: int) -> None:
        """Record a converged eigensolve."""
        with self._lock:
            if method == "fd":
                self.eigen_metrics.fd_solves += 1
            else:
                self.eigen_metrics.evolution_solves += 1
            self.eigen_metrics.iterations += iterations

    def record_floquet_root(self) -> None:
        """Record a dispersion root found by bisection."""
        with self._lock:
            self.eigen_metrics.floquet_roots += 1

    def record_fallback(self) -> None:
        """Record an FD solve that fell back to the evolution method."""
        with self._lock:
            self.eigen_metrics.fallbacks += 1

    def record_eigen_failure(self) -> None:
        """Record a failed eigensolve."""
        with self._lock:
            self.eigen_metrics.failures += 1

    def record_simulation(self, steps: int, contaminated: bool) -> None:
        """Record a finished simulation."""
        with self._lock:
            self.simulation_metrics.simulations += 1
            self.simulation_metrics.steps += steps
            if contaminated:
                self.simulation_metrics.contaminated_runs += 1

    def record_sweep_row(self, success: bool, wall_time: float) -> None:
        """Record a sweep row."""
        with self._lock:
            self.sweep_metrics.rows += 1
            self.sweep_metrics.wall_time_seconds += wall_time
            if not success:
                self.sweep_metrics.failed_rows += 1

    def get_total_runtime(self) -> float:
        """Get total runtime in seconds."""
        return time.time() - self.start_time

    def get_summary(self) -> Dict[str, Any]:
        """Get a summary of all metrics."""
        with self._lock:
            return {
                "timestamp": datetime.now().isoformat(),
                "runtime_seconds": self.get_total_runtime(),
                "eigen": asdict(self.eigen_metrics),
                "simulation": asdict(self.simulation_metrics),
                "sweep": asdict(self.sweep_metrics),
            }

    def reset(self) -> None:
        """Zero every counter."""
        with self._lock:
            self.eigen_metrics = EigenMetrics()
            self.simulation_metrics = SimulationMetrics()
            self.sweep_metrics = SweepMetrics()
            self.start_time = time.time()


# Global metrics instance
_metrics_tracker: Optional[MetricsTracker] = None


def get_metrics_tracker() -> MetricsTracker:
    """Get the global metrics tracker instance."""
    global _metrics_tracker
    if _metrics_tracker is None:
        _metrics_tracker = MetricsTracker()
    return _metrics_tracker


def log_metrics_summary() -> None:
    """Log the current metrics summary."""
    logger.info("Metrics summary", **get_metrics_tracker().get_summary())
