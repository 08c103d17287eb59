"""Edge case tests for crossdesign"""
from dataclasses import replace

import numpy as np
import pytest

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.estimators.nuisances import build_nuisances
from crossdesign.estimators.outcome import (
    conditional_ptsm_ccds_or, estimate_ccds_or, estimate_obs_rand, estimate_psi2_or,
    estimate_psi3_or
)
from crossdesign.estimators.registry import EstimationPlan, run_plan
from crossdesign.estimators.sensitivity import SensitivitySpec, sensitivity_bounds
from crossdesign.estimators.two_stage import estimate_ccds_2stage
from crossdesign.exceptions import StratumError, UsageError
from crossdesign.learners.linear import fit_outcome_regression
from crossdesign.learners.logistic import fit_binary_propensity
from crossdesign.learners.specs import RegressionSpec
from crossdesign.overlap.region import overlap_from_mask
from crossdesign.simulation.population import confounding_decomposition, generate_population
from crossdesign.simulation.scenarios import scenario_from_dict
from crossdesign.tests.stubs import StubRegressor

ALL_ESTIMATORS = ('rand', 'obs-rand', 'ccds-or', 'ccds-2stage', 'ccds-2stage-wd',
                  'ccds-ipw', 'ccds-aipw', 'psi2-or', 'psi3-or')


@pytest.mark.edge_cases
class TestDegenerateStrata:
    """Strata that are empty or miss a treatment arm are hard errors"""

    def test_no_randomized_overlap(self, noisy_sample):
        sample, r = noisy_sample
        overlap = overlap_from_mask(sample, r & (sample.s == OBS))
        with pytest.raises(StratumError) as exc:
            build_nuisances(sample, overlap, RegressionSpec.main_terms(), RegressionSpec.main_terms())
        assert str(exc.value) == "empty stratum rct∩overlap"

    def test_arm_missing_from_observational_overlap(self, noisy_sample):
        sample, r = noisy_sample
        r = r & ~((sample.s == OBS) & (sample.a == '2'))
        with pytest.raises(StratumError) as exc:
            build_nuisances(sample, overlap_from_mask(sample, r),
                            RegressionSpec.main_terms(), RegressionSpec.main_terms())
        assert exc.value.stratum == 'obs∩overlap'
        assert "treatment 2 absent" in str(exc.value)

    def test_whole_observational_group_in_overlap(self, stub_nuisances):
        sample = TargetSample([1.0, 2.0, 3.0], ['1', '2', '1'], [1, 0, 0], [[0.0], [1.0], [2.0]])
        nuisances = stub_nuisances(sample, [True, True, True], outcome_spec=RegressionSpec.main_terms())
        with pytest.raises(StratumError) as exc:
            estimate_psi3_or(sample, nuisances, '1')
        assert str(exc.value) == "empty stratum obs∩nonoverlap"


@pytest.mark.edge_cases
class TestConstantInputs:
    def test_constant_outcome_regression(self, noisy_sample):
        sample, _ = noisy_sample
        fitted = fit_outcome_regression(sample.with_outcome(np.full(sample.n, 2.5)),
                                        RegressionSpec.main_terms())
        assert np.allclose(fitted.predict(sample.x, '1'), 2.5)
        assert np.allclose(fitted.predict(sample.x, '2'), 2.5)

    def test_intercept_only_logistic_is_the_proportion(self):
        sample = TargetSample(np.zeros(4), ['1'] * 4, [1, 1, 1, 0], [[0.1], [0.4], [-0.3], [0.8]])
        model = fit_binary_propensity(sample, sample.s, RegressionSpec.custom(['1']))
        assert model.predict(sample.x) == pytest.approx([0.75] * 4, abs=1e-8)

    def test_constant_fits_give_constant_estimates(self, stub_nuisances):
        sample = TargetSample([0.0] * 4, ['1', '2', '1', '2'], [1, 1, 0, 0], [[0.0], [1.0], [2.0], [3.0]])
        nuisances = stub_nuisances(sample, [True, True, True, False], q_rct=StubRegressor(4.0),
                                   q_obs=StubRegressor(4.0), q_rct_ov=StubRegressor(4.0),
                                   q_obs_ov=StubRegressor(4.0), q_obs_nonov=StubRegressor(4.0))
        for estimator in (estimate_ccds_or, estimate_psi2_or, estimate_psi3_or, estimate_obs_rand):
            assert estimator(sample, nuisances, '1') == pytest.approx(4.0)

    def test_constant_outcome_through_every_estimator(self, noisy_sample):
        sample, r = noisy_sample
        flat = sample.with_outcome(np.full(sample.n, -3.0))
        result = run_plan(flat, EstimationPlan(estimators=ALL_ESTIMATORS),
                          overlap=overlap_from_mask(flat, r))
        for name, estimate in result.estimates.items():
            assert estimate.values['1'] == pytest.approx(-3.0, abs=1e-8), name
            assert estimate.values['2'] == pytest.approx(-3.0, abs=1e-8), name


@pytest.mark.edge_cases
class TestNoObservationalUnits:
    def test_conditional_mean_is_randomized_fit(self, stub_nuisances):
        sample = TargetSample([0.0, 0.0], ['1', '2'], [1, 1], [[0.0], [1.0]])
        nuisances = stub_nuisances(sample, [True, True], q_rct=StubRegressor(lambda x, a: 2.0 + x[:, 0]),
                                   q_obs=StubRegressor(9.0))
        x = np.array([[0.0], [3.0]])
        assert conditional_ptsm_ccds_or(x, nuisances, '1').tolist() == pytest.approx([2.0, 5.0])

    def test_plug_in_reduces_to_randomized(self, stub_nuisances):
        sample = TargetSample([0.0, 0.0], ['1', '2'], [1, 1], [[0.0], [1.0]])
        nuisances = stub_nuisances(sample, [True, True], q_rct=StubRegressor(lambda x, a: 2.0 + x[:, 0]),
                                   q_obs=StubRegressor(9.0), q_obs_ov=StubRegressor(7.0))
        assert estimate_ccds_or(sample, nuisances, '1') == pytest.approx(2.5)


@pytest.mark.edge_cases
class TestZeroBias:
    def test_two_stage_without_bias_is_obs_rand(self, noisy_sample):
        """Identical overlap fits give a zero Stage-1 target and a zero bias function"""
        sample, r = noisy_sample
        nuisances = build_nuisances(sample, overlap_from_mask(sample, r),
                                    RegressionSpec.main_terms(), RegressionSpec.main_terms())
        same = nuisances.q_rct_ov
        unbiased = replace(nuisances, q_obs_ov=same)
        for a in sample.treatment_levels:
            expected = estimate_obs_rand(sample, unbiased, a)
            assert estimate_ccds_or(sample, unbiased, a) == pytest.approx(expected, abs=1e-10)
            assert estimate_ccds_2stage(sample, unbiased, a) == pytest.approx(expected, abs=1e-8)

    def test_no_unmeasured_effect(self):
        config = scenario_from_dict({'seed': 2, 'population': {'size': 20000, 'n': 100},
                                     'outcome': {'u_coef': 0.0}})
        decomposition = confounding_decomposition(generate_population(config))
        assert decomposition.unmeasured == {'1': 0.0, '2': 0.0}


@pytest.mark.edge_cases
class TestSensitivityGrid:
    def test_empty_grid(self, fitted_nuisances):
        sample, nuisances = fitted_nuisances
        with pytest.raises(UsageError) as exc:
            sensitivity_bounds(sample, nuisances, '1', SensitivitySpec(('1',), ()))
        assert "is empty" in str(exc.value)

    def test_missing_treatment_grid(self, fitted_nuisances):
        sample, nuisances = fitted_nuisances
        spec = SensitivitySpec(('1',), {'2': [(1.0,)]})
        with pytest.raises(UsageError):
            sensitivity_bounds(sample, nuisances, '1', spec)


@pytest.mark.edge_cases
def test_study_groups_only_randomized(noisy_sample):
    sample, _ = noisy_sample
    rct_only = sample.subset(sample.s == RCT)
    with pytest.raises(StratumError) as exc:
        run_plan(rct_only, EstimationPlan(estimators=('rand',)),
                 overlap=overlap_from_mask(rct_only, np.ones(rct_only.n, dtype=bool)))
    assert exc.value.stratum == 'obs'
