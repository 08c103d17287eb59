"""Influence-function variance for the augmented weighting estimator"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.stats import norm

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import NuisanceSet
from crossdesign.estimators.registry import CCDS_AIPW
from crossdesign.estimators.weighting import TERMS, aipw_terms, combine_terms
from crossdesign.inference.results import EIF_PLUGIN, InferenceResult, Interval, adjusted_level

logger = logging.getLogger(__name__)

# Term signs in p1*chi1 + p0*chi2 - p0*chi3 + p0*chi4
SIGNS = {'w1': 1.0, 'w2': 1.0, 'w3': -1.0, 'w4': 1.0}


@dataclass
class EifResult:
    treatment: str
    estimate: float
    values: np.ndarray
    variance: float
    chi: Dict[str, float]

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance))


def _variance(values: np.ndarray, weight: np.ndarray) -> float:
    total = float(weight.sum())
    return float(np.sum(weight * values ** 2) / total ** 2)


def eif_values(sample: TargetSample, nuisances: NuisanceSet, a: str) -> EifResult:
    """Per-unit influence values of the augmented estimator for treatment ``a``.

    Weights are stabilised to sum to the size of their study group and each
    component is centred at its augmented mean, so the values sum to zero.
    Study shares are treated as fixed by the sampling design.
    """
    terms = aipw_terms(sample, nuisances, a)
    omega = sample.weight
    groups = {'w1': sample.s == RCT, 'w2': sample.s == OBS, 'w3': sample.s == OBS, 'w4': sample.s == OBS}

    values = np.zeros(sample.n)
    for name in TERMS:
        w = terms.weights.term(name)
        q = terms.predictions[name]
        group = groups[name].astype(float)
        stabilised = w * float(np.sum(omega * group)) / float(np.sum(omega * w))
        component = stabilised * (sample.y - q) + group * (q - terms.chi[name])
        values += SIGNS[name] * component

    estimate = combine_terms(sample, terms.chi)
    return EifResult(str(a), estimate, values, _variance(values, omega), dict(terms.chi))


def eif_inference(sample: TargetSample, nuisances: NuisanceSet,
                  treatments: Optional[Sequence[str]] = None,
                  level: float = 0.95, multiplicity_k: int = 1) -> InferenceResult:
    """Normal-approximation intervals from the influence values, contrasts included"""
    treatments = list(treatments or sample.treatment_levels)
    z = float(norm.ppf(1.0 - (1.0 - adjusted_level(level, multiplicity_k)) / 2.0))
    per_arm = {a: eif_values(sample, nuisances, a) for a in treatments}

    result = InferenceResult(CCDS_AIPW, EIF_PLUGIN, level, multiplicity_k, replications=0)

    def add(key: str, estimate: float, variance: float):
        se = float(np.sqrt(variance))
        result.intervals[key] = Interval(estimate, se, estimate - z * se, estimate + z * se)

    for a, eif in per_arm.items():
        add(f"ptsm[{a}]", eif.estimate, eif.variance)
    for i, a in enumerate(treatments):
        for b in treatments[i + 1:]:
            diff = per_arm[a].values - per_arm[b].values
            add(f"pate[{a}-{b}]", per_arm[a].estimate - per_arm[b].estimate,
                _variance(diff, sample.weight))
    return result
