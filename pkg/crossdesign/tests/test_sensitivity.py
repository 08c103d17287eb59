"""Tests for the sensitivity analysis over posited bias functions"""
import numpy as np
import pytest

from crossdesign.core.sample import TargetSample
from crossdesign.estimators.outcome import estimate_obs_rand
from crossdesign.estimators.sensitivity import SensitivitySpec, sensitivity_bounds
from crossdesign.exceptions import UsageError
from crossdesign.tests.stubs import StubPropensity, StubRegressor


@pytest.fixture
def four_units(stub_nuisances):
    sample = TargetSample([0.0] * 4, ['1', '2', '1', '2'], [1, 1, 0, 0], [[0.0], [1.0], [2.0], [3.0]])
    nuisances = stub_nuisances(sample, [True] * 4, q_rct=StubRegressor(4.0), q_obs=StubRegressor(8.0),
                               pi_a_obs=StubPropensity(0.25))
    return sample, nuisances


class TestSensitivitySpec:
    def test_intercept_range(self):
        spec = SensitivitySpec.intercept_range(-10.0, 10.0, points=5)
        assert spec.bias_basis == ('1',)
        assert spec.grid_for('1')[:, 0].tolist() == [-10.0, -5.0, 0.0, 5.0, 10.0]

    def test_per_treatment_grids(self):
        spec = SensitivitySpec(('1', 'x1'), {'1': [(0.0, 1.0)], '2': [(1.0, 0.0), (2.0, 0.0)]})
        assert spec.grid_for('2').shape == (2, 2)
        with pytest.raises(UsageError):
            spec.grid_for('3')

    def test_dimension_mismatch(self):
        spec = SensitivitySpec(('1', 'x1'), [(1.0,)])
        with pytest.raises(UsageError) as exc:
            spec.grid_for('1')
        assert "basis has 2 functions" in str(exc.value)


class TestSensitivityBounds:
    def test_constant_bias_closed_form(self, four_units):
        sample, nuisances = four_units
        result = sensitivity_bounds(sample, nuisances, '1', SensitivitySpec(('1',), [(-2.0,), (2.0,)]))
        # obs/rand = 6, observational share 1/2, untreated share 3/4
        assert result.lower == pytest.approx(6.0 - 2.0 * 0.75 * 0.5)
        assert result.upper == pytest.approx(6.0 + 2.0 * 0.75 * 0.5)

    def test_zero_bias_is_obs_rand(self, four_units):
        sample, nuisances = four_units
        result = sensitivity_bounds(sample, nuisances, '1', SensitivitySpec())
        assert result.lower == result.upper == pytest.approx(estimate_obs_rand(sample, nuisances, '1'))

    def test_covariate_basis(self, four_units):
        sample, nuisances = four_units
        result = sensitivity_bounds(sample, nuisances, '1', SensitivitySpec(('x1',), [(1.0,)]))
        # observational x1 values are 2 and 3
        assert result.lower == pytest.approx(6.0 - (2.0 + 3.0) * 0.75 / 4.0)

    def test_curve_rows(self, four_units):
        sample, nuisances = four_units
        result = sensitivity_bounds(sample, nuisances, '2', SensitivitySpec.intercept_range(0.0, 1.0, 3))
        rows = result.as_rows()
        assert [r['beta'] for r in rows] == ['0', '0.5', '1']
        assert all(r['treatment'] == '2' for r in rows)
        assert np.diff([r['estimate'] for r in rows]).max() < 0
