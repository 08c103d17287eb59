"""Outcome-regression (plug-in) estimators of treatment-specific means"""
import logging
from typing import Tuple

import numpy as np

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import NuisanceSet
from crossdesign.exceptions import EstimationError, UsageError

logger = logging.getLogger(__name__)

FRACTION = 'fraction'
PROPENSITY = 'propensity'


def weighted_mean(values: np.ndarray, weight: np.ndarray) -> float:
    total = float(np.sum(weight))
    if total <= 0:
        raise EstimationError("sampling weights sum to zero")
    return float(np.sum(weight * values) / total)


def study_fractions(sample: TargetSample) -> Tuple[float, float]:
    """Weighted shares (randomized, observational) of the target sample"""
    return sample.weighted_fraction(sample.s == RCT), sample.weighted_fraction(sample.s == OBS)


def debias_term(sample: TargetSample, nuisances: NuisanceSet, a: str) -> np.ndarray:
    """Q(S=0, a, R=1, x) - Q(S=1, a, R=1, x) at every unit"""
    return nuisances.q_obs_ov.predict(sample.x, a) - nuisances.q_rct_ov.predict(sample.x, a)


def study_plug_in(sample: TargetSample, nuisances: NuisanceSet, a: str) -> np.ndarray:
    rct = sample.s == RCT
    return np.where(rct, nuisances.q_rct.predict(sample.x, a), nuisances.q_obs.predict(sample.x, a))


def estimate_rand(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Randomized-data regression extrapolated to every unit"""
    return weighted_mean(nuisances.q_rct.predict(sample.x, a), sample.weight)


def estimate_obs_rand(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Each study's own regression evaluated on its own units"""
    return weighted_mean(study_plug_in(sample, nuisances, a), sample.weight)


def estimate_ccds_or(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Observational plug-in with the overlap-region bias subtracted.

    The debiasing term is evaluated at every observational unit, inside the
    overlap region or not.
    """
    obs = (sample.s == OBS).astype(float)
    values = study_plug_in(sample, nuisances, a) - obs * debias_term(sample, nuisances, a)
    return weighted_mean(values, sample.weight)


def _obs_only_contribution(sample: TargetSample, nuisances: NuisanceSet, a: str) -> np.ndarray:
    q_nonov = nuisances.obs_nonoverlap_regression()
    return q_nonov.predict(sample.x, a) - debias_term(sample, nuisances, a)


def estimate_psi2_or(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """Alternative decomposition: randomized regression on randomized and
    observational-overlap units, debiased nonoverlap regression elsewhere"""
    r = nuisances.r_overlap
    obs_only = (sample.s == OBS) & ~r
    values = np.where(obs_only, _obs_only_contribution(sample, nuisances, a),
                      nuisances.q_rct.predict(sample.x, a))
    return weighted_mean(values, sample.weight)


def estimate_psi3_or(sample: TargetSample, nuisances: NuisanceSet, a: str) -> float:
    """As ``estimate_psi2_or`` with the randomized-overlap regression on
    observational overlap units"""
    r = nuisances.r_overlap
    rct = sample.s == RCT
    obs_overlap = (sample.s == OBS) & r
    values = np.where(rct, nuisances.q_rct.predict(sample.x, a),
                      np.where(obs_overlap, nuisances.q_rct_ov.predict(sample.x, a),
                               _obs_only_contribution(sample, nuisances, a)))
    return weighted_mean(values, sample.weight)


def conditional_ptsm_ccds_or(x: np.ndarray, nuisances: NuisanceSet, a: str,
                             weighting: str = FRACTION) -> np.ndarray:
    """E(Y^a | X = x) as a mix of randomized and debiased observational means.

    ``fraction`` mixes with the sample's study shares; ``propensity`` mixes
    with the untrimmed selection propensity at ``x``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if weighting == FRACTION:
        if nuisances.sample is None:
            raise UsageError("fraction weighting needs the sample the nuisances were fit on")
        p_rct, p_obs = study_fractions(nuisances.sample)
    elif weighting == PROPENSITY:
        raw = getattr(nuisances.pi_s, 'raw_probabilities', None)
        p_rct = raw(x)[:, 1] if raw is not None else nuisances.pi_s.predict(x, 1)
        p_obs = 1.0 - p_rct
    else:
        raise UsageError(f"unknown weighting {weighting!r}", valid=[FRACTION, PROPENSITY])

    q_rct = nuisances.q_rct.predict(x, a)
    q_obs = nuisances.q_obs.predict(x, a)
    bias = nuisances.q_obs_ov.predict(x, a) - nuisances.q_rct_ov.predict(x, a)
    return p_rct * q_rct + p_obs * (q_obs - bias)
