"""Point estimators of population treatment-specific means"""
from crossdesign.estimators.nuisances import NuisanceSet, build_nuisances, stratum_masks
from crossdesign.estimators.outcome import (
    FRACTION, PROPENSITY, conditional_ptsm_ccds_or, estimate_ccds_or, estimate_obs_rand,
    estimate_psi2_or, estimate_psi3_or, estimate_rand, study_fractions
)
from crossdesign.estimators.registry import (
    EstimationPlan, EstimatorRegistry, PlanResult, PtsmEstimate, default_registry,
    estimate_overlap, run_plan
)
from crossdesign.estimators.sensitivity import SensitivityResult, SensitivitySpec, sensitivity_bounds
from crossdesign.estimators.two_stage import estimate_2stage_wd, estimate_ccds_2stage, fit_bias_function
from crossdesign.estimators.weighting import (
    IpwWeights, aipw_terms, compute_ipw_weights, estimate_ccds_aipw, estimate_ccds_ipw
)

__all__ = [
    'NuisanceSet', 'build_nuisances', 'stratum_masks',
    'FRACTION', 'PROPENSITY', 'conditional_ptsm_ccds_or', 'estimate_ccds_or', 'estimate_obs_rand',
    'estimate_psi2_or', 'estimate_psi3_or', 'estimate_rand', 'study_fractions',
    'EstimationPlan', 'EstimatorRegistry', 'PlanResult', 'PtsmEstimate', 'default_registry',
    'estimate_overlap', 'run_plan',
    'SensitivityResult', 'SensitivitySpec', 'sensitivity_bounds',
    'estimate_2stage_wd', 'estimate_ccds_2stage', 'fit_bias_function',
    'IpwWeights', 'aipw_terms', 'compute_ipw_weights', 'estimate_ccds_aipw', 'estimate_ccds_ipw',
]
