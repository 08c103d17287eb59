"""Nonparametric bootstrap with percentile intervals"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np

from crossdesign.config import settings
from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.registry import EstimationPlan, PlanResult, run_plan
from crossdesign.exceptions import UsageError
from crossdesign.inference.results import BOOTSTRAP_PERCENTILE, InferenceResult, Interval, adjusted_level
from crossdesign.monitoring.metrics import MetricsTracker
from crossdesign.utils.retry import RetryConfig, with_redraw
from crossdesign.utils.rng import BOOTSTRAP_STREAM, make_generator

logger = logging.getLogger(__name__)


def resample_rows(s: np.ndarray, rng: np.random.Generator, stratified: bool = True) -> np.ndarray:
    """Row indices of one resample of size n.

    Stratified draws keep the randomized and observational group sizes.
    """
    n = s.shape[0]
    if not stratified:
        return rng.integers(0, n, size=n)
    parts = []
    for group in (RCT, OBS):
        members = np.flatnonzero(s == group)
        if members.size:
            parts.append(members[rng.integers(0, members.size, size=members.size)])
    return np.sort(np.concatenate(parts))


def percentile_interval(replicates: np.ndarray, level: float) -> tuple:
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(replicates, [tail, 1.0 - tail])
    return float(lo), float(hi)


def bootstrap_ci(sample: TargetSample, plan: EstimationPlan, replications: int,
                 level: float = 0.95, multiplicity_k: int = 1, seed: int = 0,
                 stratified: bool = True, freeze_overlap: bool = False,
                 threads: int = settings.THREADS,
                 metrics: Optional[MetricsTracker] = None,
                 point: Optional[PlanResult] = None) -> Dict[str, InferenceResult]:
    """Bootstrap every estimator of ``plan``.

    Each replicate refits all nuisances and, unless ``freeze_overlap``,
    re-estimates the overlap region. Replicate r draws from the stream keyed
    by (seed, r, attempt); a replicate whose strata degenerate is redrawn
    with the next attempt number.
    """
    if replications < 2:
        raise UsageError(f"bootstrap needs at least 2 replications, got {replications}")
    marginal = adjusted_level(level, multiplicity_k)
    point = point or run_plan(sample, plan)

    @with_redraw(metrics, RetryConfig())
    def replicate(index: int, attempt: int = 0) -> Dict[str, Dict[str, float]]:
        rng = make_generator(seed, BOOTSTRAP_STREAM, index, attempt)
        rows = resample_rows(sample.s, rng, stratified)
        boot = sample.resample(rows)
        overlap = point.overlap.take(rows) if freeze_overlap else None
        result = run_plan(boot, plan, overlap=overlap)
        return {name: est.estimands() for name, est in result.estimates.items()}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        draws: List[Dict[str, Dict[str, float]]] = list(pool.map(replicate, range(replications)))

    results = {}
    for name, estimate in point.estimates.items():
        result = InferenceResult(name, BOOTSTRAP_PERCENTILE, level, multiplicity_k, replications)
        for estimand, value in estimate.estimands().items():
            values = np.array([draw[name][estimand] for draw in draws])
            lo, hi = percentile_interval(values, marginal)
            result.intervals[estimand] = Interval(value, float(np.std(values, ddof=1)), lo, hi)
            result.replicates[estimand] = values.tolist()
        results[name] = result
    logger.info(f"Bootstrap finished: {replications} replicates, marginal level {marginal:.4g}")
    return results
