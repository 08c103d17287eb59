"""Tests for bootstrap and influence-function inference"""
import numpy as np
import pandas as pd
import pytest

from crossdesign.core.sample import OBS, RCT
from crossdesign.estimators.nuisances import build_nuisances
from crossdesign.estimators.registry import EstimationPlan
from crossdesign.estimators.weighting import estimate_ccds_aipw
from crossdesign.exceptions import BootstrapInstabilityError, StratumError, UsageError
from crossdesign.inference.bootstrap import bootstrap_ci, percentile_interval, resample_rows
from crossdesign.inference.influence import eif_inference, eif_values
from crossdesign.inference.results import (
    EIF_PLUGIN, RESULT_COLUMNS, InferenceResult, Interval, adjusted_level, estimand_label, write_results
)
from crossdesign.learners.specs import RegressionSpec
from crossdesign.overlap.region import CovariateBoundsRule, overlap_from_mask
from crossdesign.utils.retry import RetryConfig, with_redraw
from crossdesign.utils.rng import make_generator

FAST_PLAN = EstimationPlan(estimators=('rand', 'ccds-or'), overlap_rule=CovariateBoundsRule('x1', -0.6, 0.6))


class TestLevels:
    def test_multiplicity(self):
        assert adjusted_level(0.95, 10) == pytest.approx(0.995)
        assert adjusted_level(0.95) == pytest.approx(0.95)

    @pytest.mark.parametrize("level,k", [(1.0, 1), (0.0, 1), (0.95, 0)])
    def test_rejects(self, level, k):
        with pytest.raises(UsageError):
            adjusted_level(level, k)

    def test_labels(self):
        assert estimand_label('ptsm[1]') == '1'
        assert estimand_label('pate[1-2]') == '1-2'


class TestResampling:
    def test_stratified_keeps_group_sizes(self):
        s = np.array([RCT] * 30 + [OBS] * 70)
        rows = resample_rows(s, make_generator(1, 2, 3))
        assert rows.shape == (100,)
        assert np.sum(s[rows] == RCT) == 30

    def test_unstratified_size(self):
        s = np.array([RCT] * 30 + [OBS] * 70)
        rows = resample_rows(s, make_generator(1), stratified=False)
        assert rows.shape == (100,)
        assert rows.min() >= 0 and rows.max() < 100

    def test_same_key_same_rows(self):
        s = np.array([RCT, OBS] * 20)
        assert np.array_equal(resample_rows(s, make_generator(4, 2, 0, 0)),
                              resample_rows(s, make_generator(4, 2, 0, 0)))

    def test_higher_level_is_wider(self):
        values = make_generator(8).normal(size=500)
        lo95, hi95 = percentile_interval(values, 0.95)
        lo99, hi99 = percentile_interval(values, 0.99)
        assert lo99 <= lo95 and hi95 <= hi99


class TestBootstrap:
    def test_deterministic_and_thread_independent(self, noisy_sample):
        sample, _ = noisy_sample
        first = bootstrap_ci(sample, FAST_PLAN, 6, seed=3, threads=1)
        again = bootstrap_ci(sample, FAST_PLAN, 6, seed=3, threads=3)
        for name in ('rand', 'ccds-or'):
            assert first[name].replicates == again[name].replicates
            assert first[name].intervals == again[name].intervals

    def test_seed_changes_replicates(self, noisy_sample):
        sample, _ = noisy_sample
        first = bootstrap_ci(sample, FAST_PLAN, 4, seed=3, threads=1)
        other = bootstrap_ci(sample, FAST_PLAN, 4, seed=4, threads=1)
        assert first['rand'].replicates['ptsm[1]'] != other['rand'].replicates['ptsm[1]']

    def test_interval_contents(self, noisy_sample):
        sample, _ = noisy_sample
        result = bootstrap_ci(sample, FAST_PLAN, 8, level=0.9, multiplicity_k=2, seed=1, threads=1)['ccds-or']
        assert result.replications == 8
        assert result.marginal_level == pytest.approx(0.95)
        assert set(result.intervals) == {'ptsm[1]', 'ptsm[2]', 'pate[1-2]'}
        for estimand, interval in result.intervals.items():
            values = np.array(result.replicates[estimand])
            assert interval.se == pytest.approx(np.std(values, ddof=1))
            assert values.min() <= interval.ci_lo <= interval.ci_hi <= values.max()

    def test_constant_outcome_has_zero_width(self, noisy_sample):
        sample, _ = noisy_sample
        flat = sample.with_outcome(np.full(sample.n, 5.0))
        result = bootstrap_ci(flat, FAST_PLAN, 4, seed=2, threads=1)['ccds-or']
        interval = result.intervals['ptsm[1]']
        assert interval.estimate == pytest.approx(5.0)
        assert interval.se == pytest.approx(0.0, abs=1e-9)
        assert interval.width == pytest.approx(0.0, abs=1e-9)

    def test_frozen_overlap(self, noisy_sample):
        sample, _ = noisy_sample
        plan = EstimationPlan(estimators=('ccds-or',))
        result = bootstrap_ci(sample, plan, 3, seed=5, freeze_overlap=True, threads=1)
        assert np.isfinite(result['ccds-or'].intervals['pate[1-2]'].se)

    def test_needs_two_replications(self, noisy_sample):
        sample, _ = noisy_sample
        with pytest.raises(UsageError):
            bootstrap_ci(sample, FAST_PLAN, 1)


class TestRedraw:
    def test_redraw_then_succeed(self, metrics):
        calls = []

        @with_redraw(metrics, RetryConfig(max_attempts=3))
        def replicate(index, attempt=0):
            calls.append(attempt)
            if attempt == 0:
                raise StratumError("treatment 2 absent from stratum rct∩overlap", 'rct∩overlap', '2')
            return attempt

        assert replicate(7) == 1
        assert calls == [0, 1]
        assert metrics.metrics['redraws'] == {'rct∩overlap': 1}

    def test_instability_after_max_attempts(self, metrics):
        @with_redraw(metrics, RetryConfig(max_attempts=2))
        def replicate(index, attempt=0):
            raise StratumError("empty stratum obs∩overlap", 'obs∩overlap')

        with pytest.raises(BootstrapInstabilityError) as exc:
            replicate(4)
        assert exc.value.stratum == 'obs∩overlap'
        assert "replicate 4 failed 2 redraws" in str(exc.value)

    def test_other_errors_pass_through(self):
        @with_redraw()
        def replicate(index, attempt=0):
            raise UsageError("bad request")

        with pytest.raises(UsageError):
            replicate(0)


class TestInfluence:
    def test_values_are_centred(self, fitted_nuisances):
        sample, nuisances = fitted_nuisances
        for a in sample.treatment_levels:
            eif = eif_values(sample, nuisances, a)
            assert abs(eif.values.sum()) < 1e-8 * sample.n
            assert eif.estimate == pytest.approx(estimate_ccds_aipw(sample, nuisances, a))
            assert eif.variance == pytest.approx(np.sum(eif.values ** 2) / sample.n ** 2)

    def test_sampling_weights_enter_the_variance(self, noisy_sample):
        sample, r = noisy_sample
        weighted = sample.with_weight(np.where(sample.s == RCT, 2.0, 1.0))
        nuisances = build_nuisances(weighted, overlap_from_mask(weighted, r),
                                    RegressionSpec.main_terms(), RegressionSpec.main_terms())
        eif = eif_values(weighted, nuisances, '1')
        assert np.sum(weighted.weight * eif.values) == pytest.approx(0.0, abs=1e-8 * sample.n)
        expected = np.sum(weighted.weight * eif.values ** 2) / weighted.weight.sum() ** 2
        assert eif.variance == pytest.approx(expected)

    def test_normal_intervals(self, fitted_nuisances):
        sample, nuisances = fitted_nuisances
        single = eif_inference(sample, nuisances)
        adjusted = eif_inference(sample, nuisances, multiplicity_k=3)
        assert single.method == EIF_PLUGIN
        assert set(single.intervals) == {'ptsm[1]', 'ptsm[2]', 'pate[1-2]'}
        for key, interval in single.intervals.items():
            assert interval.estimate - interval.ci_lo == pytest.approx(interval.ci_hi - interval.estimate)
            assert interval.ci_hi - interval.ci_lo == pytest.approx(2 * 1.959963984540054 * interval.se)
            assert adjusted.intervals[key].width > interval.width
        contrast = single.intervals['pate[1-2]']
        assert contrast.estimate == pytest.approx(
            single.intervals['ptsm[1]'].estimate - single.intervals['ptsm[2]'].estimate)


class TestResults:
    def test_rows_and_csv(self, tmp_path):
        result = InferenceResult('ccds-or', 'bootstrap_percentile', 0.95, 1, 200)
        result.intervals['ptsm[1]'] = Interval(5.0, 0.5, 4.0, 6.0)
        result.intervals['pate[1-2]'] = Interval(3.0, 0.7, 1.6, 4.4)
        path = write_results([result], tmp_path / 'estimates.csv')
        frame = pd.read_csv(path, dtype={'treatment': str})
        assert list(frame.columns) == RESULT_COLUMNS
        assert frame['treatment'].tolist() == ['1', '1-2']
        assert frame['B'].tolist() == [200, 200]
        assert path.read_text().endswith('\n')

    def test_interval_contains(self):
        interval = Interval(1.0, 0.1, 0.8, 1.2)
        assert interval.contains(1.2)
        assert not interval.contains(1.3)
