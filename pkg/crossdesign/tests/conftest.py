"""Test configuration and fixtures"""
import logging
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import build_nuisances
from crossdesign.learners.specs import RegressionSpec
from crossdesign.log.structured import PACKAGE_LOGGER
from crossdesign.monitoring.metrics import MetricsTracker
from crossdesign.overlap.region import overlap_from_mask
from crossdesign.simulation.scenarios import ScenarioConfig, scenario_from_dict
from crossdesign.tests.stubs import make_stub_nuisances
from crossdesign.utils.rng import make_generator

DATA_DIR = Path(__file__).parent / 'data'


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run the full-scale benchmark reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def stub_nuisances():
    return make_stub_nuisances


def linear_draw(n: int = 800, seed: int = 11, noise: float = 0.0):
    """Sample whose outcome is exactly linear within each study group.

    Selection is a smooth logistic in x1 so no propensity separates, and
    overlap membership is an independent coin so every stratum is populated.
    """
    rng = make_generator(seed, 99)
    x = rng.normal(size=(n, 2))
    s = (rng.random(n) < expit(1.5 * x[:, 0])).astype(int)
    treated = np.where(s == RCT, rng.random(n) < 0.5, rng.random(n) < expit(0.5 * x[:, 1]))
    a = np.where(treated, '2', '1')
    y = 1.0 + 2.0 * treated + x[:, 0] - x[:, 1] + 3.0 * (s == OBS) + noise * rng.normal(size=n)
    r_overlap = rng.random(n) < 0.6
    sample = TargetSample(y, a, s, x, covariate_names=['x1', 'x2'], treatment_levels=['1', '2'])
    return sample, r_overlap


@pytest.fixture
def linear_sample():
    return linear_draw()


@pytest.fixture
def noisy_sample():
    return linear_draw(noise=1.0, seed=12)


@pytest.fixture
def fitted_nuisances():
    """Main-terms nuisances fitted on a noisy linear sample with a known overlap mask"""
    sample, r_overlap = linear_draw(noise=1.0, seed=12)
    overlap = overlap_from_mask(sample, r_overlap)
    nuisances = build_nuisances(sample, overlap, RegressionSpec.main_terms(), RegressionSpec.main_terms())
    return sample, nuisances


@pytest.fixture
def toy_csv():
    return DATA_DIR / 'toy_sample.csv'


@pytest.fixture
def metrics():
    return MetricsTracker()


@pytest.fixture
def small_scenario() -> ScenarioConfig:
    """Base design shrunk to desk size with main-terms fits"""
    return scenario_from_dict({
        'name': 'small',
        'seed': 7,
        'population': {'size': 20000, 'n': 600},
        'fit': {'outcome': 'main-terms', 'propensity': 'main-terms', 'selection': 'main-terms'},
        'run': {'iterations': 2, 'bootstrap': 0, 'estimators': ['rand', 'obs-rand', 'ccds-or'],
                'threads': 1},
    })


@pytest.fixture(autouse=True)
def restore_package_logger():
    """configure_logging rewires the package logger; undo it after each test"""
    package = logging.getLogger(PACKAGE_LOGGER)
    handlers, level, propagate = list(package.handlers), package.level, package.propagate
    yield
    package.handlers = handlers
    package.setLevel(level)
    package.propagate = propagate
