"""Stage timing and memory monitoring"""
import logging
import statistics
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import psutil

logger = logging.getLogger(__name__)


@dataclass
class StageMetrics:
    """Timing data for one named stage"""
    total_calls: int = 0
    total_duration: float = 0.0
    min_duration: float = float('inf')
    max_duration: float = 0.0
    durations: List[float] = field(default_factory=list)


class PerformanceMonitor:
    """Monitor stage durations and resident memory"""

    def __init__(self, memory_threshold: int = 4_000_000_000):
        self._lock = threading.Lock()
        self.stages: Dict[str, StageMetrics] = {}
        self.thresholds = {
            'memory_threshold': memory_threshold,
        }
        self.memory_metrics = {
            'peak_memory': 0,
            'current_memory': 0
        }

    def track_stage(self, stage: str, duration: float):
        """Record one completed stage"""
        with self._lock:
            metrics = self.stages.setdefault(stage, StageMetrics())
            metrics.total_calls += 1
            metrics.total_duration += duration
            metrics.durations.append(duration)
            metrics.min_duration = min(metrics.min_duration, duration)
            metrics.max_duration = max(metrics.max_duration, duration)

    @contextmanager
    def stage(self, name: str):
        """Time a block and sample memory when it ends"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.track_stage(name, time.perf_counter() - start)
            self.track_memory_usage()

    def track_memory_usage(self) -> int:
        """Track resident memory of this process"""
        current_memory = psutil.Process().memory_info().rss
        with self._lock:
            self.memory_metrics['current_memory'] = current_memory
            self.memory_metrics['peak_memory'] = max(
                self.memory_metrics['peak_memory'],
                current_memory
            )
        if current_memory > self.thresholds['memory_threshold']:
            logger.warning(f"Memory usage exceeded threshold: {current_memory}")
        return current_memory

    def get_performance_report(self, include_timings: bool = True) -> Dict:
        """Summarise stage timings and memory.

        ``include_timings=False`` drops wall-clock numbers so the report can be
        embedded in byte-reproducible outputs.
        """
        report: Dict[str, Optional[Dict]] = {'stages': {}}
        for name, metrics in sorted(self.stages.items()):
            entry = {'calls': metrics.total_calls}
            if include_timings and metrics.total_calls:
                entry.update({
                    'avg_duration': metrics.total_duration / metrics.total_calls,
                    'min_duration': metrics.min_duration,
                    'max_duration': metrics.max_duration,
                    'p95_duration': statistics.quantiles(metrics.durations, n=20)[18]
                    if len(metrics.durations) >= 20 else None,
                })
            report['stages'][name] = entry
        if include_timings:
            report['memory_metrics'] = dict(self.memory_metrics)
        return report
