"""Run metrics and performance tracking"""
from crossdesign.monitoring.metrics import MetricsTracker
from crossdesign.monitoring.performance import PerformanceMonitor

__all__ = ['MetricsTracker', 'PerformanceMonitor']
