"""Monte Carlo runner: repeated sample draws, estimation, intervals and performance summaries"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from crossdesign.core.sample import TargetSample
from crossdesign.estimators.registry import EstimationPlan, PlanResult, default_registry, run_plan
from crossdesign.exceptions import CrossDesignError, ScenarioError, UsageError
from crossdesign.inference.bootstrap import bootstrap_ci
from crossdesign.inference.results import Interval
from crossdesign.log.structured import StructuredLogger
from crossdesign.monitoring.metrics import MetricsTracker
from crossdesign.monitoring.performance import PerformanceMonitor
from crossdesign.overlap.region import CovariateBoundsRule, OverlapParams
from crossdesign.simulation.designs import resolve_spec
from crossdesign.simulation.population import (
    Population, PopulationTruth, draw_sample, generate_population, true_estimands
)
from crossdesign.simulation.scenarios import PROBABILISTIC, ScenarioConfig
from crossdesign.workflow.iteration_status import IterationStatus, IterationStatusTracker

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['scenario', 'estimator', 'estimand', 'bias', 'abs_bias', 'rmse',
                  'coverage', 'ci_width', 'n_iter', 'n_fail']
# Share of failed iterations above which an estimator is flagged unstable
UNSTABLE_FAILURE_RATE = 0.10


@dataclass
class EstimateMetrics:
    bias: float
    rmse: float
    coverage: float
    ci_width: float

    @property
    def abs_bias(self) -> float:
        return abs(self.bias)


def estimate_metrics(estimates: Sequence[float], truth: float,
                     intervals: Optional[Sequence[Interval]] = None) -> EstimateMetrics:
    """Bias, RMSE, coverage and mean interval width against a known truth.

    Coverage and width are NaN when no intervals were computed.
    """
    values = np.asarray(estimates, dtype=float)
    if values.size == 0:
        raise UsageError("no estimates to summarise")
    errors = values - truth
    coverage = width = float('nan')
    if intervals:
        coverage = float(np.mean([iv.ci_lo <= truth <= iv.ci_hi for iv in intervals]))
        width = float(np.mean([iv.ci_hi - iv.ci_lo for iv in intervals]))
    return EstimateMetrics(float(errors.mean()), float(np.sqrt(np.mean(errors ** 2))), coverage, width)


@dataclass
class IterationResult:
    """Estimates and intervals of one simulation iteration, keyed by estimator then estimand"""
    index: int
    seed: int
    estimates: Dict[str, Dict[str, float]] = field(default_factory=dict)
    intervals: Dict[str, Dict[str, Interval]] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)
    overlap_fraction: float = float('nan')


@dataclass
class SimulationReport:
    scenario: str
    estimators: Sequence[str]
    truth: PopulationTruth
    iterations: List[IterationResult]
    rows: List[Dict[str, object]] = field(default_factory=list)
    unstable: List[str] = field(default_factory=list)
    status: Dict[str, int] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    def failure_counts(self) -> Dict[str, int]:
        return {name: sum(name in it.failures for it in self.iterations) for name in self.estimators}

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
        logger.info(f"Wrote simulation report to {path}")
        return path


def plan_for_scenario(config: ScenarioConfig, estimators: Optional[Sequence[str]] = None) -> EstimationPlan:
    """Estimation plan built from the scenario's fit settings"""
    fit = config.fit
    rule = None
    if fit.overlap == 'oracle':
        if config.selection.rule == PROBABILISTIC:
            raise ScenarioError("oracle overlap needs a covariate-bounded selection rule")
        rule = CovariateBoundsRule('x1', *config.selection.bounds)
    return EstimationPlan(
        estimators=tuple(estimators or config.run.estimators),
        outcome_spec=resolve_spec(fit.outcome, config, 'outcome'),
        propensity_spec=resolve_spec(fit.propensity, config, 'propensity'),
        selection_spec=resolve_spec(fit.selection, config, 'selection'),
        g_spec=resolve_spec(fit.g, config, 'g'),
        g_by_arm=fit.g_by_arm,
        overlap_params=OverlapParams(fit.alpha_fraction, fit.beta_fraction, fit.scale),
        overlap_rule=rule,
        trim_floor=fit.trim_floor,
    )


def _bootstrap_intervals(sample: TargetSample, plan: EstimationPlan, point: PlanResult,
                         config: ScenarioConfig, seed: int, index: int, metrics: MetricsTracker,
                         threads: int) -> Tuple[Dict[str, Dict[str, Interval]], Dict[str, str]]:
    """Intervals for the estimators that produced a point estimate.

    The estimators are bootstrapped together first. If that run is unstable,
    each one is bootstrapped on its own so only the estimators whose replicates
    keep failing are dropped.
    """
    run = config.run

    def attempt(names: List[str]) -> Dict[str, Dict[str, Interval]]:
        subset = PlanResult({name: point.estimates[name] for name in names},
                            point.overlap, point.nuisances)
        inference = bootstrap_ci(sample, plan.with_estimators(names), run.bootstrap, run.level,
                                 run.multiplicity, seed=seed, stratified=run.stratified,
                                 freeze_overlap=run.freeze_overlap, threads=threads,
                                 metrics=metrics, point=subset)
        return {name: dict(res.intervals) for name, res in inference.items()}

    names = list(point.estimates)
    try:
        return attempt(names), {}
    except CrossDesignError as e:
        metrics.track_error(type(e).__name__, {'iteration': index, 'message': e.message})
        if len(names) == 1:
            return {}, {names[0]: f"bootstrap: {e.message}"}
        logger.warning(f"Joint bootstrap failed in iteration {index}, retrying per estimator: {e.message}")

    intervals: Dict[str, Dict[str, Interval]] = {}
    failures: Dict[str, str] = {}
    for name in names:
        try:
            intervals.update(attempt([name]))
        except CrossDesignError as e:
            metrics.track_error(type(e).__name__, {'iteration': index, 'estimator': name,
                                                   'message': e.message})
            failures[name] = f"bootstrap: {e.message}"
    return intervals, failures


def _run_iteration(index: int, seed: int, population: Population, config: ScenarioConfig,
                   plan: EstimationPlan, metrics: MetricsTracker, tracker: IterationStatusTracker,
                   bootstrap_threads: int) -> IterationResult:
    result = IterationResult(index, seed)
    tracker.update_status(index, IterationStatus.RUNNING)
    try:
        sample = draw_sample(population, config.population.n, seed)
        start = time.perf_counter()
        point = run_plan(sample, plan, strict=False)
        duration = time.perf_counter() - start
        result.overlap_fraction = float(point.overlap.r_overlap.mean())
        result.failures.update(point.failures)
        result.estimates = {name: est.estimands() for name, est in point.estimates.items()}

        if config.run.bootstrap and point.estimates:
            result.intervals, failed = _bootstrap_intervals(sample, plan, point, config, seed, index,
                                                            metrics, bootstrap_threads)
            for name, reason in failed.items():
                result.estimates.pop(name, None)
                result.failures[name] = reason
        for name in plan.estimators:
            metrics.track_estimate(name, name in result.estimates, duration)
    except CrossDesignError as e:
        metrics.track_error(type(e).__name__, {'iteration': index, 'message': e.message})
        result.estimates = {}
        result.failures.update({name: e.message for name in plan.estimators})

    if not result.failures:
        tracker.update_status(index, IterationStatus.COMPLETED)
    elif result.estimates:
        tracker.update_status(index, IterationStatus.PARTIAL, failures=result.failures)
    else:
        tracker.update_status(index, IterationStatus.FAILED, failures=result.failures)
    return result


def _aggregate(scenario: str, estimators: Sequence[str], truth: PopulationTruth,
               iterations: List[IterationResult]) -> List[Dict[str, object]]:
    rows = []
    truths = truth.estimands()
    for name in estimators:
        for estimand, true_value in truths.items():
            ok = [it for it in iterations if name in it.estimates and estimand in it.estimates[name]]
            row = {'scenario': scenario, 'estimator': name, 'estimand': estimand,
                   'bias': float('nan'), 'abs_bias': float('nan'), 'rmse': float('nan'),
                   'coverage': float('nan'), 'ci_width': float('nan'),
                   'n_iter': len(iterations), 'n_fail': len(iterations) - len(ok)}
            if ok:
                intervals = [it.intervals[name][estimand] for it in ok
                             if estimand in it.intervals.get(name, {})]
                m = estimate_metrics([it.estimates[name][estimand] for it in ok], true_value, intervals)
                row.update(bias=m.bias, abs_bias=m.abs_bias, rmse=m.rmse,
                           coverage=m.coverage, ci_width=m.ci_width)
            rows.append(row)
    return rows


def run_scenario(config: ScenarioConfig,
                 estimators: Optional[Sequence[str]] = None,
                 iterations: Optional[int] = None,
                 bootstrap: Optional[int] = None,
                 level: Optional[float] = None,
                 seed: Optional[int] = None,
                 threads: Optional[int] = None,
                 population: Optional[Population] = None,
                 metrics: Optional[MetricsTracker] = None,
                 monitor: Optional[PerformanceMonitor] = None,
                 tracker: Optional[IterationStatusTracker] = None) -> SimulationReport:
    """Draw ``iterations`` samples from one population and summarise each estimator.

    Keyword arguments override the scenario's run settings. Iteration i draws
    its sample and bootstrap streams from ``seed + i``; iterations run on the
    thread budget and are merged in index order, so the report does not
    depend on the number of threads.
    """
    config = config.with_overrides({
        'seed': seed, 'run.iterations': iterations, 'run.bootstrap': bootstrap,
        'run.level': level, 'run.threads': threads,
        'run.estimators': tuple(estimators) if estimators else None,
    })
    run = config.run
    metrics = metrics or MetricsTracker()
    monitor = monitor or PerformanceMonitor()
    tracker = tracker or IterationStatusTracker()
    plan = plan_for_scenario(config, default_registry().validate(run.estimators))

    events = StructuredLogger()
    events.set_context(scenario=config.name, seed=config.seed)

    with monitor.stage('population'):
        population = population or generate_population(config)
        truth = true_estimands(population)

    seeds = [config.seed + i for i in range(run.iterations)]
    for i, s in enumerate(seeds):
        tracker.add_iteration(i, s)
    outer = min(run.threads, run.iterations)
    # Nested pools would oversubscribe the budget; parallel iterations bootstrap serially
    bootstrap_threads = run.threads if outer == 1 else 1

    def one(i: int) -> IterationResult:
        with monitor.stage('iteration'):
            result = _run_iteration(i, seeds[i], population, config, plan, metrics, tracker,
                                    bootstrap_threads)
        events.log(logging.INFO, "iteration finished", iteration=i,
                   failures=sorted(result.failures), overlap=result.overlap_fraction)
        return result

    with ThreadPoolExecutor(max_workers=max(1, outer)) as pool:
        results = list(pool.map(one, range(run.iterations)))

    report = SimulationReport(config.name, plan.estimators, truth, results)
    report.rows = _aggregate(config.name, plan.estimators, truth, results)
    report.status = tracker.summary()
    for name, failed in report.failure_counts().items():
        if failed > UNSTABLE_FAILURE_RATE * run.iterations:
            report.unstable.append(name)
            logger.warning(f"Estimator {name} failed in {failed}/{run.iterations} iterations; "
                           f"flagged unstable")
    events.log(logging.INFO, "scenario finished", iterations=run.iterations,
               unstable=report.unstable, status=report.status)
    return report
