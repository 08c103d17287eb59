"""Inverse-probability weighted and augmented estimators"""
import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import NuisanceSet
from crossdesign.estimators.outcome import study_fractions
from crossdesign.exceptions import ZeroWeightSumError
from crossdesign.learners.logistic import trim_probability

logger = logging.getLogger(__name__)

TERMS = ('w1', 'w2', 'w3', 'w4')


@dataclass
class IpwWeights:
    """Per-unit weights of the four terms, sampling weights not included.

    w1: randomized units; w2: observational units; w3: observational overlap
    units; w4: randomized overlap units transported to the observational
    population.
    """
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray

    def term(self, name: str) -> np.ndarray:
        return getattr(self, name)


def compute_ipw_weights(sample: TargetSample, nuisances: NuisanceSet, a: str) -> IpwWeights:
    """Four weight vectors with each denominator product trimmed before division"""
    x = sample.x
    floor = nuisances.trim_floor
    treated = sample.a == str(a)
    rct = (sample.s == RCT) & treated
    obs = (sample.s == OBS) & treated
    r = nuisances.r_overlap

    def guard(denominator):
        return trim_probability(denominator, floor)

    pi_s = nuisances.pi_s.predict(x, 1)
    w1 = rct / guard(nuisances.pi_a_rct.predict(x, a))
    w2 = obs / guard(nuisances.pi_a_obs.predict(x, a))
    w3 = (obs & r) / guard(nuisances.pi_r_obs.predict(x, 1) * nuisances.pi_a_obs_ov.predict(x, a))
    w4 = (rct & r) * (1.0 - pi_s) / guard(
        pi_s * nuisances.pi_r_rct.predict(x, 1) * nuisances.pi_a_rct_ov.predict(x, a))
    return IpwWeights(w1.astype(float), w2.astype(float), w3.astype(float), w4.astype(float))


def normalized_mean(values: np.ndarray, unit_weight: np.ndarray, sampling_weight: np.ndarray,
                    term: str, a: str) -> float:
    """Sum(w y) / Sum(w) with the sampling weight folded into w"""
    w = unit_weight * sampling_weight
    total = float(w.sum())
    if total <= 0:
        raise ZeroWeightSumError(term, str(a))
    return float(np.sum(w * values) / total)


def ipw_components(sample: TargetSample, weights: IpwWeights, a: str) -> Dict[str, float]:
    return {name: normalized_mean(sample.y, weights.term(name), sample.weight, name, a)
            for name in TERMS}


def combine_terms(sample: TargetSample, terms: Dict[str, float]) -> float:
    """p1 * t1 + p0 * t2 - p0 * (t3 - t4)"""
    p_rct, p_obs = study_fractions(sample)
    return p_rct * terms['w1'] + p_obs * terms['w2'] - p_obs * (terms['w3'] - terms['w4'])


def estimate_ccds_ipw(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Stabilised (self-normalised) weighting estimator"""
    weights = compute_ipw_weights(sample, nuisances, a)
    return combine_terms(sample, ipw_components(sample, weights, a))


@dataclass
class AugmentedTerms:
    """Outcome predictions and augmented means of the four terms"""
    weights: IpwWeights
    predictions: Dict[str, np.ndarray]
    chi: Dict[str, float]


def aipw_terms(sample: TargetSample, nuisances: NuisanceSet, a: str) -> AugmentedTerms:
    """Per term: normalised weighted residual mean plus the plug-in mean over
    the term's study group"""
    x = sample.x
    weights = compute_ipw_weights(sample, nuisances, a)
    predictions = {
        'w1': nuisances.q_rct.predict(x, a),
        'w2': nuisances.q_obs.predict(x, a),
        'w3': nuisances.q_obs_ov.predict(x, a),
        'w4': nuisances.q_rct_ov.predict(x, a),
    }
    groups = {'w1': sample.s == RCT, 'w2': sample.s == OBS, 'w3': sample.s == OBS, 'w4': sample.s == OBS}
    chi = {}
    for name in TERMS:
        residual_mean = normalized_mean(sample.y - predictions[name], weights.term(name),
                                        sample.weight, name, a)
        group = groups[name]
        plug_in = normalized_mean(predictions[name], group.astype(float), sample.weight, name, a)
        chi[name] = residual_mean + plug_in
    return AugmentedTerms(weights=weights, predictions=predictions, chi=chi)


def estimate_ccds_aipw(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Augmented weighting estimator, doubly robust per term"""
    return combine_terms(sample, aipw_terms(sample, nuisances, a).chi)
