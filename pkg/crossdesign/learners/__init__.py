"""Nuisance regressions: outcome models, propensity models and stacking"""
from crossdesign.learners.specs import RegressionSpec, read_design_file, spec_from_token
from crossdesign.learners.linear import FittedRegressor, fit_outcome_regression
from crossdesign.learners.logistic import (
    OVERLAP_MEMBERSHIP, SELECTION, TREATMENT, PropensityModel,
    fit_binary_propensity, fit_treatment_propensity, trim_probability
)
from crossdesign.learners.ensemble import fit_ensemble

__all__ = [
    'RegressionSpec', 'read_design_file', 'spec_from_token',
    'FittedRegressor', 'fit_outcome_regression', 'fit_ensemble',
    'PropensityModel', 'fit_binary_propensity', 'fit_treatment_propensity', 'trim_probability',
    'SELECTION', 'TREATMENT', 'OVERLAP_MEMBERSHIP',
]
