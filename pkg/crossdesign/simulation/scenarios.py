"""Scenario configuration: INI-style files validated into pydantic models"""
import configparser
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.stats import norm

from crossdesign.config import settings
from crossdesign.config.validator import ConfigValidator
from crossdesign.exceptions import ScenarioError

logger = logging.getLogger(__name__)

DETERMINISTIC_X1 = 'deterministic_x1'
PROBABILISTIC = 'probabilistic'
S_FUNCTION_OF_U = 's_function_of_u'

BINOM_HALF = 'binom_half'
FUNCTION_OF_X1 = 'function_of_x1'

OUTCOME_VARIANTS = ('base', 'main_terms_only', 'complex_heterogeneity', 'knot_1', 'knot_2',
                    'knot_3', 'u_x1_interaction', 'constant_bias_violation')

ALL_ESTIMATORS = ('rand', 'obs-rand', 'ccds-or', 'ccds-2stage', 'ccds-2stage-wd',
                  'ccds-ipw', 'ccds-aipw', 'psi2-or', 'psi3-or')

# Half-width of the U effect on selection inside the overlap region
S_U_SPREAD = 0.125


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', validate_assignment=True)


class PopulationSettings(_Section):
    size: int = Field(1_000_000, ge=1)
    n: int = Field(10_000, ge=2)
    u_distribution: Literal['binom_half', 'function_of_x1'] = BINOM_HALF
    u_observed: bool = False

    @model_validator(mode='after')
    def _sample_fits(self):
        if self.n > self.size:
            raise ValueError(f"sample size {self.n} exceeds population size {self.size}")
        return self


class SelectionSettings(_Section):
    rule: Literal['deterministic_x1', 'probabilistic', 's_function_of_u'] = DETERMINISTIC_X1
    lower_quantile: float = Field(0.5, ge=0.0, le=1.0)
    upper_quantile: float = Field(0.9, ge=0.0, le=1.0)
    target_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    ratio: Optional[str] = None
    overlap_probability: Optional[float] = Field(None, gt=0.0, lt=1.0)

    @field_validator('ratio')
    @classmethod
    def _ratio_format(cls, value):
        if value is None:
            return value
        try:
            rct, obs = (float(v) for v in value.split(':'))
        except ValueError:
            raise ValueError(f"ratio must look like '1:4', got {value!r}")
        if rct <= 0 or obs <= 0:
            raise ValueError("ratio parts must be positive")
        return value

    @model_validator(mode='after')
    def _bounds(self):
        if not self.lower_quantile < self.upper_quantile:
            raise ValueError("lower_quantile must be below upper_quantile")
        if self.rule != PROBABILISTIC:
            p = self.resolved_overlap_probability
            if not 0 < p < 1:
                raise ValueError(f"quantile bounds cannot reach randomized fraction "
                                 f"{self.rct_fraction:g} (overlap selection probability {p:g})")
            if self.rule == S_FUNCTION_OF_U and not S_U_SPREAD <= p <= 1 - S_U_SPREAD:
                raise ValueError(f"overlap selection probability {p:g} leaves no room for the U effect")
        return self

    @property
    def rct_fraction(self) -> float:
        """Target P(S=1), from ``ratio`` when given"""
        if self.ratio:
            rct, obs = (float(v) for v in self.ratio.split(':'))
            return rct / (rct + obs)
        return self.target_fraction

    @property
    def bounds(self) -> Tuple[float, float]:
        """Overlap bounds on X1"""
        return float(norm.ppf(self.lower_quantile)), float(norm.ppf(self.upper_quantile))

    @property
    def resolved_overlap_probability(self) -> float:
        """P(S=1) inside the overlap band so that P(S=1) hits the target.

        Units above the upper bound are always randomized, so
        P(S=1) = (1 - upper) + p * (upper - lower).
        """
        if self.overlap_probability is not None:
            return self.overlap_probability
        return (self.rct_fraction - (1.0 - self.upper_quantile)) / (self.upper_quantile - self.lower_quantile)


class TreatmentSettings(_Section):
    rct_probability: float = Field(0.6, gt=0.0, lt=1.0)
    obs_intercept: float = -0.8
    u_coef: float = 0.625


class OutcomeSettings(_Section):
    variant: Literal[OUTCOME_VARIANTS] = 'base'
    u_coef: float = 10.0
    noise_sd: float = Field(1.0, ge=0.0)


class FitSettings(_Section):
    outcome: str = 'correct'
    propensity: str = 'correct'
    selection: str = 'correct'
    g: str = 'main-terms'
    alpha_fraction: float = Field(0.01, gt=0.0, lt=1.0)
    beta_fraction: float = Field(0.01, gt=0.0, lt=1.0)
    scale: Literal['logit', 'probability'] = 'logit'
    trim_floor: float = Field(settings.TRIM_FLOOR, gt=0.0, lt=0.5)
    g_by_arm: bool = False
    overlap: Literal['estimated', 'oracle'] = 'estimated'
    ensemble_folds: int = Field(settings.ENSEMBLE_FOLDS, ge=2)
    fold_seed: int = Field(0, ge=0)


class RunSettings(_Section):
    iterations: int = Field(200, ge=1)
    bootstrap: int = Field(200, ge=0)
    level: float = Field(0.95, gt=0.0, lt=1.0)
    multiplicity: int = Field(1, ge=1)
    estimators: Tuple[str, ...] = ALL_ESTIMATORS
    threads: int = Field(settings.THREADS, ge=1)
    stratified: bool = True
    freeze_overlap: bool = False

    @field_validator('estimators', mode='before')
    @classmethod
    def _split(cls, value):
        if isinstance(value, str):
            return tuple(v.strip() for v in value.split(',') if v.strip())
        return value

    @field_validator('bootstrap')
    @classmethod
    def _bootstrap_size(cls, value):
        if value == 1:
            raise ValueError("bootstrap needs 0 (off) or at least 2 replications")
        return value


class ScenarioConfig(_Section):
    """A data-generating mechanism plus how to fit and run it"""
    name: str = 'base'
    seed: int = Field(0, ge=0)
    population: PopulationSettings = Field(default_factory=PopulationSettings)
    selection: SelectionSettings = Field(default_factory=SelectionSettings)
    treatment: TreatmentSettings = Field(default_factory=TreatmentSettings)
    outcome: OutcomeSettings = Field(default_factory=OutcomeSettings)
    fit: FitSettings = Field(default_factory=FitSettings)
    run: RunSettings = Field(default_factory=RunSettings)

    def with_overrides(self, overrides: Mapping[str, Any]) -> 'ScenarioConfig':
        """Apply dotted-key overrides (``run.iterations``); ``None`` values are skipped"""
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = key.split('.')
            for part in parents:
                if part not in target or not isinstance(target[part], dict):
                    raise ScenarioError(f"unknown override {key!r}")
                target = target[part]
            if leaf not in target:
                raise ScenarioError(f"unknown override {key!r}")
            target[leaf] = value
        return scenario_from_dict(data)

    def manifest(self) -> Dict[str, Any]:
        return self.model_dump(mode='json')


def _errors(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in e['loc']) or 'scenario'}: {e['msg']}" for e in error.errors()]


def scenario_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(dict(data))
    except ValidationError as e:
        errors = _errors(e)
        raise ScenarioError(f"invalid scenario: {'; '.join(errors)}", errors)


def parse_scenario_text(text: str, source: str = '<string>') -> ScenarioConfig:
    """Parse INI text: sections are nested keys, ``[scenario]`` holds name and seed"""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ScenarioError(f"cannot parse {source}: {e}", [str(e)])

    sections: Dict[str, Dict[str, str]] = {s: dict(parser.items(s)) for s in parser.sections()}
    errors = ConfigValidator().validate_config_file(sections)
    if errors:
        raise ScenarioError(f"invalid scenario {source}: {'; '.join(errors)}", errors)

    data: Dict[str, Union[str, Dict[str, str]]] = dict(sections.pop('scenario', {}))
    data.update(sections)
    return scenario_from_dict(data)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}")
    config = parse_scenario_text(text, source=str(path))
    logger.info(f"Loaded scenario {config.name!r} from {path}")
    return config
