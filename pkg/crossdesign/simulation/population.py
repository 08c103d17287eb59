"""Data-generating mechanisms, sample draws and ground truths"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.exceptions import ScenarioError, UsageError
from crossdesign.simulation.scenarios import (
    DETERMINISTIC_X1, FUNCTION_OF_X1, PROBABILISTIC, S_FUNCTION_OF_U, S_U_SPREAD, ScenarioConfig
)
from crossdesign.utils.rng import POPULATION_STREAM, SAMPLE_STREAM, make_generator

logger = logging.getLogger(__name__)

# Label "1" is the numeric A = 0 arm of the outcome mean, label "2" is A = 1
TREATMENT_LEVELS = ('1', '2')
COVARIATES = ('x1', 'x2', 'x3', 'x4')
U_COLUMN = 'u'


@dataclass
class Population:
    """Finite population with both potential outcomes stored"""
    x: np.ndarray
    u: np.ndarray
    s: np.ndarray
    a: np.ndarray
    y_potential: np.ndarray
    y: np.ndarray
    overlap_true: np.ndarray
    covariate_names: Tuple[str, ...] = COVARIATES
    config: Optional[ScenarioConfig] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.y.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(TREATMENT_LEVELS, dtype=object)[self.a]

    @property
    def covariates(self) -> np.ndarray:
        """Measured covariates, with U appended when it is observed"""
        if U_COLUMN in self.covariate_names:
            return np.column_stack([self.x, self.u])
        return self.x


def outcome_mean(a: np.ndarray, x: np.ndarray, u: np.ndarray, variant: str = 'base',
                 u_coef: float = 10.0) -> np.ndarray:
    """mu_Y for numeric arm ``a`` (0 or 1)"""
    a = np.broadcast_to(np.asarray(a, dtype=float), u.shape)
    x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    linear = -1.5 - 3 * a + 4 * x1 + 4 * x2 + 3 * x3 + 2 * x4 + 4 * a * x1 + u_coef * u
    cubic = (x1 + 1) ** 3

    if variant == 'main_terms_only':
        return linear
    if variant == 'complex_heterogeneity':
        return linear + 2 * cubic + 2 * a * cubic

    mu = linear + 0.4 * cubic
    if variant == 'base':
        return mu
    if variant == 'knot_1':
        hinge = (x1 < -1) * (x1 + 1)
        return mu - 15 * hinge - 15 * hinge * a
    if variant == 'knot_2':
        hinge = (x1 < -0.5) * (x1 + 0.5)
        return mu - 45 * hinge + 15 * hinge * a
    if variant == 'knot_3':
        hinge = (x1 < 0.5) * (x1 - 0.5)
        return mu - 2 * hinge - 2 * hinge * a
    if variant == 'u_x1_interaction':
        return mu + 2 * u * x1 + u * x1 * a
    if variant == 'constant_bias_violation':
        hinge = u * (x1 + 0.5) * (x1 < -0.5)
        return mu - np.where(a == 0, 45.0, 30.0) * hinge
    raise ScenarioError(f"unknown outcome variant {variant!r}")


def selection_linear_predictor(x: np.ndarray) -> np.ndarray:
    """Covariate part of the probabilistic selection logit"""
    x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    return 2 * x1 + x2 + 0.5 * x3 + 0.1 * x4 + 0.1 * x1 ** 3 + 0.1 * np.sin(x1 ** 3 * x2)


def solve_selection_intercept(linear: np.ndarray, target: float) -> float:
    """Intercept b with mean(expit(linear - b)) = target"""
    def gap(b):
        return float(np.mean(expit(linear - b))) - target
    span = float(np.max(np.abs(linear))) + 50.0
    return brentq(gap, -span, span, xtol=1e-12)


def _selection(config: ScenarioConfig, x: np.ndarray, u: np.ndarray,
               rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    sel = config.selection
    n = x.shape[0]
    if sel.rule == PROBABILISTIC:
        linear = selection_linear_predictor(x)
        intercept = solve_selection_intercept(linear, sel.rct_fraction)
        logger.info(f"Probabilistic selection intercept {intercept:.6g}")
        s = rng.binomial(1, expit(linear - intercept))
        return s, np.ones(n, dtype=bool)

    lower, upper = sel.bounds
    x1 = x[:, 0]
    inside = (x1 >= lower) & (x1 <= upper)
    p = sel.resolved_overlap_probability
    p_inside = np.full(n, p)
    if sel.rule == S_FUNCTION_OF_U:
        p_inside = p - S_U_SPREAD + 2 * S_U_SPREAD * u
    elif sel.rule != DETERMINISTIC_X1:
        raise ScenarioError(f"unknown selection rule {sel.rule!r}")
    draws = rng.binomial(1, np.clip(p_inside, 0.0, 1.0))
    s = np.where(x1 > upper, RCT, np.where(x1 < lower, OBS, draws))
    return s.astype(int), inside


def _treatment(config: ScenarioConfig, x: np.ndarray, u: np.ndarray, s: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    tr = config.treatment
    x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    logit_obs = tr.obs_intercept + 0.125 * x1 + 0.1 * x2 + 0.075 * x3 + 0.05 * x4 + tr.u_coef * u
    if config.outcome.variant != 'main_terms_only':
        logit_obs = logit_obs + 0.1 * (x1 + 1) ** 3
    p = np.where(s == RCT, tr.rct_probability, expit(logit_obs))
    return rng.binomial(1, p).astype(int)


def generate_population(config: ScenarioConfig, seed: Optional[int] = None) -> Population:
    """Draw X, U, S, A and both potential outcomes for every unit"""
    seed = config.seed if seed is None else seed
    rng = make_generator(seed, POPULATION_STREAM)
    size = config.population.size

    x = rng.standard_normal((size, len(COVARIATES)))
    if config.population.u_distribution == FUNCTION_OF_X1:
        u = rng.binomial(1, expit(30 * x[:, 0])).astype(float)
    else:
        u = rng.binomial(1, 0.5, size).astype(float)
    s, overlap_true = _selection(config, x, u, rng)
    a = _treatment(config, x, u, s, rng)

    noise = rng.standard_normal((size, len(TREATMENT_LEVELS))) * config.outcome.noise_sd
    y_potential = np.column_stack([
        outcome_mean(arm, x, u, config.outcome.variant, config.outcome.u_coef) + noise[:, arm]
        for arm in range(len(TREATMENT_LEVELS))
    ])
    y = y_potential[np.arange(size), a]

    names = COVARIATES + ((U_COLUMN,) if config.population.u_observed else ())
    population = Population(x, u, s, a, y_potential, y, overlap_true, names, config)
    logger.info(f"Generated population of {size} (P(S=1) = {s.mean():.3f}) for scenario {config.name!r}")
    return population


def draw_sample(population: Population, n: int, seed: int) -> TargetSample:
    """Uniform draw without replacement; only observed data are exported"""
    if n > population.size:
        raise UsageError(f"sample size {n} exceeds population size {population.size}")
    rng = make_generator(seed, SAMPLE_STREAM)
    rows = np.sort(rng.choice(population.size, size=n, replace=False))
    return TargetSample(
        population.y[rows], population.labels[rows], population.s[rows],
        population.covariates[rows], covariate_names=population.covariate_names,
        treatment_levels=TREATMENT_LEVELS, index=rows,
    )


@dataclass
class PopulationTruth:
    """Exact averages of the stored potential outcomes"""
    ptsm: Dict[str, float]
    pate: Dict[Tuple[str, str], float]
    stsm: Dict[int, Dict[str, float]]
    sate: Dict[int, float]
    observed: Dict[int, Dict[str, float]]
    overlap_fraction: Dict[str, float]

    def estimands(self) -> Dict[str, float]:
        flat = {f"ptsm[{a}]": v for a, v in self.ptsm.items()}
        flat.update({f"pate[{a}-{b}]": v for (a, b), v in self.pate.items()})
        return flat

    def rows(self) -> List[Dict[str, object]]:
        """Long format: quantity, group, treatment, value"""
        groups = {RCT: 'rct', OBS: 'obs'}
        rows = [{'quantity': 'ptsm', 'group': 'population', 'treatment': a, 'value': v}
                for a, v in self.ptsm.items()]
        rows += [{'quantity': 'pate', 'group': 'population', 'treatment': f"{a}-{b}", 'value': v}
                 for (a, b), v in self.pate.items()]
        for s in (RCT, OBS):
            rows += [{'quantity': 'stsm', 'group': groups[s], 'treatment': a, 'value': v}
                     for a, v in self.stsm[s].items()]
            rows.append({'quantity': 'sate', 'group': groups[s], 'treatment': '1-2', 'value': self.sate[s]})
            rows += [{'quantity': 'observed_mean', 'group': groups[s], 'treatment': a, 'value': v}
                     for a, v in self.observed[s].items()]
        rows += [{'quantity': 'overlap_fraction', 'group': g, 'treatment': '', 'value': v}
                 for g, v in self.overlap_fraction.items()]
        return rows


def _mean(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else float('nan')


def true_estimands(population: Population) -> PopulationTruth:
    yp, s, a = population.y_potential, population.s, population.a
    levels = TREATMENT_LEVELS
    ptsm = {level: _mean(yp[:, k]) for k, level in enumerate(levels)}
    stsm = {g: {level: _mean(yp[s == g, k]) for k, level in enumerate(levels)} for g in (RCT, OBS)}
    observed = {g: {level: _mean(population.y[(s == g) & (a == k)]) for k, level in enumerate(levels)}
                for g in (RCT, OBS)}
    r = population.overlap_true
    return PopulationTruth(
        ptsm=ptsm,
        pate={(levels[0], levels[1]): ptsm[levels[0]] - ptsm[levels[1]]},
        stsm=stsm,
        sate={g: stsm[g][levels[0]] - stsm[g][levels[1]] for g in (RCT, OBS)},
        observed=observed,
        overlap_fraction={'obs': _mean(r[s == OBS].astype(float)),
                          'rct': _mean(r[s == RCT].astype(float)),
                          'total': _mean(r.astype(float))},
    )


@dataclass
class ConfoundingDecomposition:
    """Observational arm-mean bias split into its unmeasured and measured parts"""
    total: Dict[str, float]
    unmeasured: Dict[str, float]
    measured: Dict[str, float]


def confounding_decomposition(population: Population) -> ConfoundingDecomposition:
    """E(Y | S=0, A=a) - E(Y^a | S=0), with the U part taken from the outcome mean.

    The U part is the shift in E[mu(a, X, U) - mu(a, X, 0)] between treated
    observational units and all observational units; the rest is attributed
    to measured covariates.
    """
    config = population.config
    if config is None:
        raise UsageError("confounding decomposition needs the generating scenario")
    obs = population.s == OBS
    x, u = population.x[obs], population.u[obs]
    a = population.a[obs]
    total, unmeasured, measured = {}, {}, {}
    for k, level in enumerate(TREATMENT_LEVELS):
        arm = a == k
        shift = (outcome_mean(k, x, u, config.outcome.variant, config.outcome.u_coef)
                 - outcome_mean(k, x, np.zeros_like(u), config.outcome.variant, config.outcome.u_coef))
        total[level] = _mean(population.y[obs][arm]) - _mean(population.y_potential[obs, k])
        unmeasured[level] = _mean(shift[arm]) - _mean(shift)
        measured[level] = total[level] - unmeasured[level]
    return ConfoundingDecomposition(total, unmeasured, measured)
