"""Estimator registry and the fit-then-estimate plan shared by the CLI, bootstrap and simulation"""
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from crossdesign.config import settings
from crossdesign.core.sample import TargetSample
from crossdesign.estimators.nuisances import NuisanceSet, build_nuisances
from crossdesign.estimators.outcome import (
    estimate_ccds_or, estimate_obs_rand, estimate_psi2_or, estimate_psi3_or, estimate_rand
)
from crossdesign.estimators.two_stage import estimate_2stage_wd, estimate_ccds_2stage
from crossdesign.estimators.weighting import estimate_ccds_aipw, estimate_ccds_ipw
from crossdesign.exceptions import CrossDesignError, UsageError
from crossdesign.learners.logistic import SELECTION, PropensityModel, fit_binary_propensity
from crossdesign.learners.specs import RegressionSpec
from crossdesign.overlap.region import (
    CovariateBoundsRule, OverlapAssignment, OverlapParams, assign_overlap, overlap_from_mask
)

logger = logging.getLogger(__name__)

RAND = 'rand'
OBS_RAND = 'obs-rand'
CCDS_OR = 'ccds-or'
CCDS_2STAGE = 'ccds-2stage'
CCDS_2STAGE_WD = 'ccds-2stage-wd'
CCDS_IPW = 'ccds-ipw'
CCDS_AIPW = 'ccds-aipw'
PSI2_OR = 'psi2-or'
PSI3_OR = 'psi3-or'


@dataclass
class EstimatorStats:
    """Running statistics for one estimator"""
    calls: int = 0
    failures: int = 0
    total_seconds: float = 0.0
    last_error: Optional[str] = None


@dataclass(frozen=True)
class EstimatorEntry:
    name: str
    func: Callable[..., float]
    description: str
    options: Tuple[str, ...] = ()


class EstimatorRegistry:
    """Maps command-line estimator tokens to estimator functions"""

    def __init__(self):
        self._entries: Dict[str, EstimatorEntry] = {}
        self._stats: Dict[str, EstimatorStats] = {}
        self._lock = threading.Lock()

        self.register(RAND, estimate_rand, "randomized regression extrapolated to all units")
        self.register(OBS_RAND, estimate_obs_rand, "each study's regression on its own units")
        self.register(CCDS_OR, estimate_ccds_or, "outcome regression with overlap debiasing")
        self.register(CCDS_2STAGE, estimate_ccds_2stage, "two-stage debiasing on the overlap",
                      options=('g_spec', 'by_arm'))
        self.register(CCDS_2STAGE_WD, estimate_2stage_wd, "two-stage debiasing on all randomized units",
                      options=('g_spec', 'by_arm'))
        self.register(CCDS_IPW, estimate_ccds_ipw, "stabilised inverse-probability weighting")
        self.register(CCDS_AIPW, estimate_ccds_aipw, "augmented inverse-probability weighting")
        self.register(PSI2_OR, estimate_psi2_or, "alternative decomposition, randomized regression")
        self.register(PSI3_OR, estimate_psi3_or, "alternative decomposition, overlap regression")

    def register(self, name: str, func: Callable[..., float], description: str,
                 options: Sequence[str] = ()):
        self._entries[name] = EstimatorEntry(name, func, description, tuple(options))
        self._stats.setdefault(name, EstimatorStats())

    @property
    def names(self) -> List[str]:
        return list(self._entries)

    def get(self, name: str) -> EstimatorEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise UsageError(f"unknown estimator {name!r}", valid=self.names)

    def validate(self, names: Sequence[str]) -> Tuple[str, ...]:
        """Check every name and drop duplicates, order kept"""
        if not names:
            raise UsageError("no estimators selected", valid=self.names)
        for name in names:
            self.get(name)
        return tuple(dict.fromkeys(names))

    def evaluate(self, name: str, sample: TargetSample, nuisances: NuisanceSet, a: str,
                 **options) -> float:
        entry = self.get(name)
        kwargs = {k: v for k, v in options.items() if k in entry.options}
        stats = self._stats[name]
        start = time.perf_counter()
        try:
            value = entry.func(sample, nuisances, a, **kwargs)
        except CrossDesignError as e:
            with self._lock:
                stats.failures += 1
                stats.last_error = e.message
            raise
        finally:
            with self._lock:
                stats.calls += 1
                stats.total_seconds += time.perf_counter() - start
        return value

    def get_stats(self, name: Optional[str] = None) -> Dict[str, EstimatorStats]:
        if name:
            return {name: self._stats[name]}
        return dict(self._stats)


@dataclass
class PtsmEstimate:
    """Treatment-specific means for one estimator, with their contrasts"""
    estimator: str
    values: Dict[str, float]
    pate: Dict[Tuple[str, str], float] = field(default_factory=dict)
    fingerprints: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_values(cls, estimator: str, values: Dict[str, float],
                    fingerprints: Optional[Dict[str, str]] = None) -> 'PtsmEstimate':
        levels = list(values)
        pate = {(a, b): values[a] - values[b]
                for i, a in enumerate(levels) for b in levels[i + 1:]}
        return cls(estimator, dict(values), pate, dict(fingerprints or {}))

    def estimands(self) -> Dict[str, float]:
        """Flat map: ``ptsm[a]`` for each treatment and ``pate[a-b]`` for each pair"""
        flat = {f"ptsm[{a}]": v for a, v in self.values.items()}
        flat.update({f"pate[{a}-{b}]": v for (a, b), v in self.pate.items()})
        return flat


@dataclass(frozen=True)
class EstimationPlan:
    """Everything needed to go from a sample to estimates"""
    estimators: Tuple[str, ...] = (CCDS_OR,)
    outcome_spec: RegressionSpec = field(default_factory=RegressionSpec.main_terms)
    propensity_spec: RegressionSpec = field(default_factory=RegressionSpec.main_terms)
    selection_spec: Optional[RegressionSpec] = None
    g_spec: Optional[RegressionSpec] = None
    g_by_arm: bool = False
    overlap_params: OverlapParams = field(default_factory=OverlapParams)
    overlap_rule: Optional[CovariateBoundsRule] = None
    trim_floor: float = settings.TRIM_FLOOR
    treatments: Optional[Tuple[str, ...]] = None

    def with_estimators(self, names: Sequence[str]) -> 'EstimationPlan':
        return replace(self, estimators=tuple(names))

    def fingerprints(self) -> Dict[str, str]:
        prints = {'outcome': self.outcome_spec.fingerprint(),
                  'propensity': self.propensity_spec.fingerprint()}
        if self.selection_spec is not None:
            prints['selection'] = self.selection_spec.fingerprint()
        if self.g_spec is not None:
            prints['g'] = self.g_spec.fingerprint()
        return prints


@dataclass
class PlanResult:
    estimates: Dict[str, PtsmEstimate]
    overlap: OverlapAssignment
    nuisances: NuisanceSet
    failures: Dict[str, str] = field(default_factory=dict)


def estimate_overlap(sample: TargetSample, plan: EstimationPlan
                     ) -> Tuple[OverlapAssignment, Optional[PropensityModel]]:
    """Overlap from the known covariate rule when given, else from the fitted selection propensity"""
    if plan.overlap_rule is not None:
        return overlap_from_mask(sample, plan.overlap_rule.membership(sample)), None
    pi_s = fit_binary_propensity(sample, sample.s, plan.selection_spec or plan.propensity_spec,
                                 SELECTION, plan.trim_floor)
    return assign_overlap(sample, pi_s, plan.overlap_params), pi_s


_default_registry: Optional[EstimatorRegistry] = None


def default_registry() -> EstimatorRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = EstimatorRegistry()
    return _default_registry


def run_plan(sample: TargetSample, plan: EstimationPlan,
             overlap: Optional[OverlapAssignment] = None,
             registry: Optional[EstimatorRegistry] = None,
             strict: bool = True) -> PlanResult:
    """Estimate overlap (unless given), fit nuisances, evaluate every estimator.

    With ``strict=False`` an estimator that fails is recorded in
    ``failures`` and the others still run; nuisance failures always raise.
    """
    registry = registry or default_registry()
    names = registry.validate(plan.estimators)
    pi_s = None
    if overlap is None:
        overlap, pi_s = estimate_overlap(sample, plan)
    nuisances = build_nuisances(sample, overlap, plan.outcome_spec, plan.propensity_spec,
                                pi_s=pi_s, selection_spec=plan.selection_spec,
                                trim_floor=plan.trim_floor)
    treatments = plan.treatments or sample.treatment_levels
    fingerprints = plan.fingerprints()

    estimates: Dict[str, PtsmEstimate] = {}
    failures: Dict[str, str] = {}
    for name in names:
        try:
            values = {a: registry.evaluate(name, sample, nuisances, a,
                                           g_spec=plan.g_spec, by_arm=plan.g_by_arm)
                      for a in treatments}
        except CrossDesignError as e:
            if strict:
                raise
            failures[name] = e.message
            logger.warning(f"Estimator {name} failed: {e.message}")
            continue
        estimates[name] = PtsmEstimate.from_values(name, values, fingerprints)
    return PlanResult(estimates, overlap, nuisances, failures)
