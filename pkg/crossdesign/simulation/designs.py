"""Correctly specified regression designs for each scenario"""
from typing import Tuple

from crossdesign.learners.specs import RegressionSpec, indicator_name, spec_from_token
from crossdesign.simulation.population import TREATMENT_LEVELS, U_COLUMN
from crossdesign.simulation.scenarios import PROBABILISTIC, ScenarioConfig

CORRECT = 'correct'
ARM = indicator_name(TREATMENT_LEVELS[1])
# Ridge for the step-function selection design, where the classes separate
SELECTION_RIDGE = 1e-3

_HINGES = {
    'knot_1': '(x1 < -1) * (x1 + 1)',
    'knot_2': '(x1 < -0.5) * (x1 + 0.5)',
    'knot_3': '(x1 < 0.5) * (x1 - 0.5)',
    'constant_bias_violation': '(x1 < -0.5) * (x1 + 0.5)',
}


def outcome_terms(config: ScenarioConfig) -> Tuple[str, ...]:
    """Basis of the outcome mean with U replaced by stratum intercepts.

    Within a fitting stratum U enters through its conditional mean, which the
    arm indicator and intercept absorb in the base case.
    """
    variant = config.outcome.variant
    terms = ['1', ARM, 'x1', 'x2', 'x3', 'x4', f'{ARM} * x1']
    if variant == 'complex_heterogeneity':
        terms += ['(x1 + 1) ** 3', f'{ARM} * (x1 + 1) ** 3']
    elif variant != 'main_terms_only':
        terms.append('(x1 + 1) ** 3')
    if variant in _HINGES:
        hinge = _HINGES[variant]
        terms += [hinge, f'{ARM} * {hinge}']
    if config.population.u_observed:
        terms.append(U_COLUMN)
        if variant == 'u_x1_interaction':
            terms += [f'{U_COLUMN} * x1', f'{ARM} * {U_COLUMN} * x1']
        if variant == 'constant_bias_violation':
            terms += [f"{U_COLUMN} * {_HINGES[variant]}", f"{ARM} * {U_COLUMN} * {_HINGES[variant]}"]
    return tuple(terms)


def treatment_terms(config: ScenarioConfig) -> Tuple[str, ...]:
    terms = ['1', 'x1', 'x2', 'x3', 'x4']
    if config.outcome.variant != 'main_terms_only':
        terms.append('(x1 + 1) ** 3')
    if config.population.u_observed:
        terms.append(U_COLUMN)
    return tuple(terms)


def selection_terms(config: ScenarioConfig) -> Tuple[str, ...]:
    if config.selection.rule == PROBABILISTIC:
        return ('1', 'x1', 'x2', 'x3', 'x4', 'x1 ** 3')
    lower, upper = config.selection.bounds
    return ('1', f'x1 >= {lower!r}', f'x1 > {upper!r}')


def correct_outcome_spec(config: ScenarioConfig) -> RegressionSpec:
    return RegressionSpec.custom(outcome_terms(config), label=f'correct:{config.outcome.variant}')


def correct_propensity_spec(config: ScenarioConfig) -> RegressionSpec:
    return RegressionSpec.custom(treatment_terms(config), label='correct:treatment')


def correct_selection_spec(config: ScenarioConfig) -> RegressionSpec:
    ridge = 0.0 if config.selection.rule == PROBABILISTIC else SELECTION_RIDGE
    return RegressionSpec.custom(selection_terms(config), ridge_penalty=ridge, label='correct:selection')


def resolve_spec(token: str, config: ScenarioConfig, role: str) -> RegressionSpec:
    """Regression spec for a scenario token; ``correct`` maps to the scenario's own design"""
    if token == CORRECT:
        if role == 'g':
            return correct_outcome_spec(config).without_treatment()
        return {'outcome': correct_outcome_spec,
                'propensity': correct_propensity_spec,
                'selection': correct_selection_spec}[role](config)
    if token == 'ensemble':
        return RegressionSpec.ensemble(folds=config.fit.ensemble_folds, fold_seed=config.fit.fold_seed)
    return spec_from_token(token, fold_seed=config.fit.fold_seed)
