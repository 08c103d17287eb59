"""Counters for fits, fallbacks, redraws and failures"""
import json
import logging
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Dict

logger = logging.getLogger(__name__)


class MetricsTracker:
    """Track estimator outcomes across iterations and replicates"""

    def __init__(self):
        self._lock = threading.Lock()
        self.metrics: Dict[str, Any] = {
            'estimators': {},
            'redraws': {},
            'errors': {},
        }

    def track_estimate(self, estimator: str, success: bool, duration: float):
        """Record one estimator evaluation"""
        with self._lock:
            if estimator not in self.metrics['estimators']:
                self.metrics['estimators'][estimator] = {
                    'total_runs': 0,
                    'successful_runs': 0,
                    'failed_runs': 0,
                    'total_duration': 0.0,
                }
            stats = self.metrics['estimators'][estimator]
            stats['total_runs'] += 1
            stats['total_duration'] += duration
            if success:
                stats['successful_runs'] += 1
            else:
                stats['failed_runs'] += 1

    def track_redraw(self, stratum: str):
        """Record a bootstrap replicate redrawn because of a degenerate stratum"""
        with self._lock:
            self.metrics['redraws'][stratum] = self.metrics['redraws'].get(stratum, 0) + 1

    def track_error(self, error_type: str, details: Dict[str, Any]):
        """Track error occurrences"""
        with self._lock:
            if error_type not in self.metrics['errors']:
                self.metrics['errors'][error_type] = {
                    'count': 0,
                    'last_occurrence': None,
                    'details': []
                }
            entry = self.metrics['errors'][error_type]
            entry['count'] += 1
            entry['last_occurrence'] = datetime.now()
            if len(entry['details']) < 20:
                entry['details'].append(details)

    def failure_rate(self, estimator: str) -> float:
        stats = self.metrics['estimators'].get(estimator)
        if not stats or stats['total_runs'] == 0:
            return 0.0
        return stats['failed_runs'] / stats['total_runs']

    def save_metrics(self, output_dir: Path) -> Path:
        """Save metrics to ``metrics.json`` in the output directory"""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        output_file = output_dir / "metrics.json"
        with open(output_file, 'w') as f:
            json.dump(self.metrics, f, indent=2, default=str, sort_keys=True)
        logger.info(f"Saved run metrics to {output_file}")
        return output_file
