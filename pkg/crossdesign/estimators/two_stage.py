"""Two-stage debiasing: regress the estimated conditional bias on covariates"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import NuisanceSet
from crossdesign.estimators.outcome import estimate_obs_rand, weighted_mean
from crossdesign.exceptions import StratumError
from crossdesign.learners.linear import FittedRegressor, fit_outcome_regression
from crossdesign.learners.logistic import trim_probability
from crossdesign.learners.specs import RegressionSpec

logger = logging.getLogger(__name__)

STAGE_OVERLAP = 'rct∩overlap'
STAGE_WHOLE = 'rct'


@dataclass
class BiasFit:
    """Stage-two regression of the stage-one bias with its inputs"""
    g: FittedRegressor
    rows: np.ndarray
    bias: np.ndarray
    weights: np.ndarray


def fit_bias_function(sample: TargetSample, nuisances: NuisanceSet, a: str,
                      g_spec: Optional[RegressionSpec] = None,
                      whole_data: bool = False, by_arm: bool = False) -> BiasFit:
    """Stage one and stage two of the two-stage estimators.

    Stage one evaluates b'(x) = Q_obs(a, x) - Q_rct(a, x) on randomized units
    (overlap units only unless ``whole_data``); stage two regresses it on x
    with weights (1 - pi_S) / (pi_S * pi_R) normalised to sum to one.
    ``by_arm`` keeps only units that received ``a`` and adds pi_A to the
    weight denominator.
    """
    g_spec = (g_spec or RegressionSpec.main_terms()).without_treatment()
    rows = sample.s == RCT
    if not whole_data:
        rows = rows & nuisances.r_overlap
    if by_arm:
        rows = rows & (sample.a == str(a))
    stratum = STAGE_WHOLE if whole_data else STAGE_OVERLAP
    if not rows.any():
        raise StratumError(f"empty stratum {stratum}" + (f" for treatment {a}" if by_arm else ""),
                           stratum, str(a) if by_arm else None)

    x = sample.x[rows]
    if whole_data:
        bias = nuisances.q_obs.predict(x, a) - nuisances.q_rct.predict(x, a)
    else:
        bias = nuisances.q_obs_ov.predict(x, a) - nuisances.q_rct_ov.predict(x, a)

    pi_s = nuisances.pi_s.predict(x, 1)
    denominator = pi_s.copy()
    if not whole_data:
        denominator *= nuisances.pi_r_rct.predict(x, 1)
    if by_arm:
        arm_model = nuisances.pi_a_rct if whole_data else nuisances.pi_a_rct_ov
        denominator *= arm_model.predict(x, a)
    weights = sample.weight[rows] * (1.0 - pi_s) / trim_probability(denominator, nuisances.trim_floor)
    total = weights.sum()
    if total <= 0:
        raise StratumError(f"bias weights vanish on stratum {stratum}", stratum)
    weights = weights / total

    stage = sample.subset(rows).with_outcome(bias).with_weight(weights)
    g = fit_outcome_regression(stage, g_spec, use_treatment=False)
    return BiasFit(g=g, rows=rows, bias=bias, weights=weights)


def _debiased(sample: TargetSample, nuisances: NuisanceSet, a: str, fit: BiasFit) -> float:
    obs = (sample.s == OBS).astype(float)
    correction = weighted_mean(obs * fit.g.predict(sample.x), sample.weight)
    return estimate_obs_rand(sample, nuisances, a) - correction


def estimate_ccds_2stage(sample: TargetSample, nuisances: NuisanceSet, a: str,
                         g_spec: Optional[RegressionSpec] = None, by_arm: bool = False) -> float:
    """obs/rand minus the stage-two bias function averaged over observational units"""
    fit = fit_bias_function(sample, nuisances, a, g_spec, whole_data=False, by_arm=by_arm)
    return _debiased(sample, nuisances, a, fit)


def estimate_2stage_wd(sample: TargetSample, nuisances: NuisanceSet, a: str,
                       g_spec: Optional[RegressionSpec] = None, by_arm: bool = False) -> float:
    """Two-stage estimator with stage one on every randomized unit"""
    fit = fit_bias_function(sample, nuisances, a, g_spec, whole_data=True, by_arm=by_arm)
    return _debiased(sample, nuisances, a, fit)
