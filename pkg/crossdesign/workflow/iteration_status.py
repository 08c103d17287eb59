"""Simulation iteration status tracking"""
import threading
from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional


class IterationStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    PARTIAL = "partial"
    FAILED = "failed"


class IterationStatusTracker:
    """Track status of simulation iterations.

    PARTIAL marks an iteration where some estimators failed and others
    produced estimates.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.iterations: Dict[int, Dict] = {}

    def add_iteration(self, index: int, seed: int):
        """Add a new iteration to tracking"""
        now = datetime.now()
        with self._lock:
            self.iterations[index] = {
                "seed": seed,
                "status": IterationStatus.PENDING,
                "created_at": now,
                "last_updated": now,
                "failures": {},
                "status_history": [{"status": IterationStatus.PENDING, "timestamp": now}],
            }

    def update_status(self, index: int, status: IterationStatus,
                      notes: Optional[str] = None, failures: Optional[Dict[str, str]] = None):
        """Update iteration status"""
        with self._lock:
            if index not in self.iterations:
                raise ValueError(f"Iteration {index} not found")
            entry = self.iterations[index]
            entry["status"] = status
            entry["last_updated"] = datetime.now()
            if failures:
                entry["failures"].update(failures)
            entry["status_history"].append({
                "status": status,
                "timestamp": entry["last_updated"],
                "notes": notes,
            })

    def get_iteration_status(self, index: int) -> Dict:
        """Get current iteration status"""
        if index not in self.iterations:
            raise ValueError(f"Iteration {index} not found")
        return self.iterations[index]

    def with_status(self, status: IterationStatus) -> List[int]:
        return sorted(i for i, entry in self.iterations.items() if entry["status"] == status)

    def failure_reasons(self) -> Dict[str, int]:
        """Count of failure messages across iterations"""
        counts: Dict[str, int] = {}
        for entry in self.iterations.values():
            for reason in entry["failures"].values():
                counts[reason] = counts.get(reason, 0) + 1
        return counts

    def summary(self) -> Dict[str, int]:
        return {status.value: len(self.with_status(status)) for status in IterationStatus}
