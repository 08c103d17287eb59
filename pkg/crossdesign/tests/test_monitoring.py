"""Tests for metrics, performance monitoring, iteration status, logging and runtime config"""
import json
import logging

import pytest

from crossdesign.config import CrossDesignConfig
from crossdesign.exceptions import ConfigurationError
from crossdesign.log.structured import PACKAGE_LOGGER, StructuredLogger, configure_logging
from crossdesign.monitoring.performance import PerformanceMonitor
from crossdesign.workflow.iteration_status import IterationStatus, IterationStatusTracker


@pytest.fixture
def tracker():
    """Fresh iteration tracker with two iterations"""
    tracker = IterationStatusTracker()
    tracker.add_iteration(0, 7)
    tracker.add_iteration(1, 8)
    return tracker


class TestMetricsTracker:
    def test_estimator_counts(self, metrics):
        metrics.track_estimate('ccds-or', True, 0.5)
        metrics.track_estimate('ccds-or', False, 0.25)
        stats = metrics.metrics['estimators']['ccds-or']
        assert stats['total_runs'] == 2
        assert stats['failed_runs'] == 1
        assert stats['total_duration'] == pytest.approx(0.75)
        assert metrics.failure_rate('ccds-or') == pytest.approx(0.5)
        assert metrics.failure_rate('rand') == 0.0

    def test_errors_keep_recent_details(self, metrics):
        for i in range(25):
            metrics.track_error('StratumError', {'iteration': i})
        entry = metrics.metrics['errors']['StratumError']
        assert entry['count'] == 25
        assert len(entry['details']) == 20
        assert entry['last_occurrence'] is not None

    def test_save(self, metrics, tmp_path):
        metrics.track_redraw('rct∩overlap')
        metrics.track_error('FitError', {'message': 'singular'})
        path = metrics.save_metrics(tmp_path / 'run')
        saved = json.loads(path.read_text())
        assert path.name == 'metrics.json'
        assert saved['redraws'] == {'rct∩overlap': 1}
        assert saved['errors']['FitError']['count'] == 1


class TestPerformanceMonitor:
    def test_stage_timing(self):
        monitor = PerformanceMonitor()
        for _ in range(3):
            with monitor.stage('fit'):
                pass
        report = monitor.get_performance_report()
        assert report['stages']['fit']['calls'] == 3
        assert report['stages']['fit']['min_duration'] <= report['stages']['fit']['max_duration']
        assert report['stages']['fit']['p95_duration'] is None
        assert report['memory_metrics']['peak_memory'] > 0

    def test_stage_recorded_on_error(self):
        monitor = PerformanceMonitor()
        with pytest.raises(RuntimeError):
            with monitor.stage('bootstrap'):
                raise RuntimeError("boom")
        assert monitor.stages['bootstrap'].total_calls == 1

    def test_report_without_timings(self):
        monitor = PerformanceMonitor()
        monitor.track_stage('iteration', 1.5)
        assert monitor.get_performance_report(include_timings=False) == {'stages': {'iteration': {'calls': 1}}}

    def test_memory_threshold_warning(self, caplog):
        monitor = PerformanceMonitor(memory_threshold=1)
        with caplog.at_level(logging.WARNING, logger='crossdesign.monitoring.performance'):
            monitor.track_memory_usage()
        assert "Memory usage exceeded threshold" in caplog.text


class TestIterationStatusTracker:
    def test_add_iteration(self, tracker):
        entry = tracker.get_iteration_status(0)
        assert entry['seed'] == 7
        assert entry['status'] == IterationStatus.PENDING
        assert len(entry['status_history']) == 1

    def test_update_status(self, tracker):
        tracker.update_status(0, IterationStatus.RUNNING)
        tracker.update_status(0, IterationStatus.PARTIAL, failures={'psi2-or': 'empty stratum obs∩nonoverlap'})
        tracker.update_status(1, IterationStatus.COMPLETED, notes="all estimators")
        assert tracker.with_status(IterationStatus.PARTIAL) == [0]
        assert tracker.get_iteration_status(1)['status_history'][-1]['notes'] == "all estimators"
        assert tracker.failure_reasons() == {'empty stratum obs∩nonoverlap': 1}
        summary = tracker.summary()
        assert summary['partial'] == 1 and summary['completed'] == 1 and summary['pending'] == 0

    def test_iteration_not_found(self, tracker):
        """Unknown iterations are reported, not created"""
        with pytest.raises(ValueError) as exc:
            tracker.update_status(5, IterationStatus.RUNNING)
        assert "not found" in str(exc.value)


class TestCrossDesignConfig:
    def test_defaults_validate(self):
        assert CrossDesignConfig().validate()

    @pytest.mark.parametrize("field,value", [
        ('LOG_LEVEL', 'LOUD'),
        ('LOG_FORMAT', 'xml'),
        ('TRIM_FLOOR', 0.5),
        ('THREADS', 0),
    ])
    def test_invalid_values(self, field, value):
        config = CrossDesignConfig()
        setattr(config, field, value)
        with pytest.raises(ConfigurationError) as exc:
            config.validate()
        assert field in exc.value.details


class TestStructuredLogging:
    def test_json_events_carry_context(self, capsys):
        configure_logging('INFO', 'json')
        events = StructuredLogger()
        events.set_context(scenario='base', seed=3)
        events.log(logging.INFO, "iteration finished", iteration=4)
        line = capsys.readouterr().err.strip().splitlines()[-1]
        record = json.loads(line)
        assert record['event'] == "iteration finished"
        assert record['scenario'] == 'base'
        assert record['iteration'] == 4
        assert record['level'] == 'info'

    def test_library_records_share_the_renderer(self, capsys):
        configure_logging('WARNING', 'json')
        logging.getLogger(f'{PACKAGE_LOGGER}.estimators').info("hidden")
        logging.getLogger(f'{PACKAGE_LOGGER}.estimators').warning("trimmed 3 weights")
        lines = capsys.readouterr().err.strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])['event'] == "trimmed 3 weights"
