"""Tests for overlap-region estimation"""
import math

import numpy as np
import pytest

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.exceptions import OverlapError, UsageError
from crossdesign.learners.logistic import PropensityModel, fit_binary_propensity
from crossdesign.learners.specs import RegressionSpec
from crossdesign.overlap.region import (
    LOGIT, PROBABILITY, REFERENCE_GRID, CovariateBoundsRule, OverlapParams, assign_overlap,
    membership_from_scores, overlap_from_mask, standardized_mean_difference, window_counts
)


@pytest.fixture
def selection(noisy_sample):
    sample, _ = noisy_sample
    return sample, fit_binary_propensity(sample, sample.s, RegressionSpec.main_terms())


class TestWindowRule:
    def test_closed_window(self):
        counts = window_counts(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0]), width=1.0)
        assert counts.tolist() == [1, 2, 1]

    def test_membership_needs_both_groups(self):
        scores = np.array([0.0, 0.1, 0.2, 5.0, 5.1])
        s = np.array([RCT, OBS, RCT, OBS, OBS])
        member = membership_from_scores(scores, s, resolved_alpha=0.3, resolved_beta=1)
        assert member.tolist() == [True, True, True, False, False]

    def test_beta_counts_the_unit_itself(self):
        scores = np.array([0.0, 0.0, 0.0])
        s = np.array([RCT, OBS, OBS])
        assert membership_from_scores(scores, s, 0.1, 2).tolist() == [False, False, False]
        assert membership_from_scores(scores, s, 0.1, 1).tolist() == [True, True, True]


class TestOverlapParams:
    def test_defaults(self):
        params = OverlapParams()
        assert (params.alpha_fraction, params.beta_fraction, params.scale) == (0.01, 0.01, LOGIT)
        assert params.label == "logit 0.01/0.01"

    @pytest.mark.parametrize("kwargs", [
        {'alpha_fraction': 0.0}, {'beta_fraction': 1.0}, {'scale': 'probit'},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(UsageError):
            OverlapParams(**kwargs)

    def test_reference_grid(self):
        assert len(REFERENCE_GRID) == 5
        assert REFERENCE_GRID[0] == OverlapParams(0.01, 0.01, PROBABILITY)
        assert REFERENCE_GRID[-1] == OverlapParams(0.10, 0.04, LOGIT)


class TestAssignOverlap:
    def test_resolved_thresholds(self, selection):
        sample, pi_s = selection
        assignment = assign_overlap(sample, pi_s, OverlapParams(0.02, 0.01, LOGIT))
        spread = assignment.scores.max() - assignment.scores.min()
        assert assignment.resolved_alpha == pytest.approx(0.02 * spread)
        assert assignment.resolved_beta == max(1, math.ceil(0.01 * min(sample.n_rct, sample.n_obs)))
        assert 0 < assignment.r_overlap.mean() < 1

    def test_scale_changes_scores(self, selection):
        sample, pi_s = selection
        logit_scale = assign_overlap(sample, pi_s, OverlapParams(scale=LOGIT))
        prob_scale = assign_overlap(sample, pi_s, OverlapParams(scale=PROBABILITY))
        assert np.allclose(prob_scale.scores, logit_scale.propensity)
        assert not np.allclose(prob_scale.scores, logit_scale.scores)

    def test_wider_window_grows_region(self, selection):
        sample, pi_s = selection
        narrow = assign_overlap(sample, pi_s, OverlapParams(0.01, 0.01))
        wide = assign_overlap(sample, pi_s, OverlapParams(0.05, 0.01))
        assert np.all(wide.r_overlap[narrow.r_overlap])

    def test_diagnostics_row(self, selection):
        sample, pi_s = selection
        params = OverlapParams()
        assignment = assign_overlap(sample, pi_s, params)
        row = assignment.diagnostics.as_row(params)
        assert list(row) == ['alpha_fraction', 'beta_fraction', 'scale', 'pct_overlap_obs',
                             'pct_overlap_rct', 'pct_overlap_total', 'smd']
        obs_pct = 100.0 * assignment.r_overlap[sample.s == OBS].mean()
        assert row['pct_overlap_obs'] == pytest.approx(obs_pct)
        assert row['smd'] > 0

    def test_constant_propensity(self, noisy_sample):
        sample, _ = noisy_sample
        flat = PropensityModel.constant_model('selection', (0, 1), [0.7, 0.3])
        with pytest.raises(OverlapError) as exc:
            assign_overlap(sample, flat)
        assert "constant selection propensity" in str(exc.value)

    def test_missing_group(self, selection):
        sample, pi_s = selection
        rct_only = sample.subset(sample.s == RCT)
        with pytest.raises(OverlapError):
            assign_overlap(rct_only, pi_s)

    def test_take_follows_rows(self, selection):
        sample, pi_s = selection
        assignment = assign_overlap(sample, pi_s)
        rows = np.array([4, 4, 0, 9])
        taken = assignment.take(rows)
        assert taken.r_overlap.tolist() == assignment.r_overlap[rows].tolist()
        assert taken.resolved_alpha == assignment.resolved_alpha
        assert len(taken) == 4


class TestKnownRegion:
    def test_bounds_are_strict(self):
        sample = TargetSample([0.0] * 3, ['1'] * 3, [1, 0, 1], [[0.0], [0.5], [1.0]])
        rule = CovariateBoundsRule('x1', 0.0, 1.0)
        assert rule.membership(sample).tolist() == [False, True, False]

    def test_from_mask(self):
        sample = TargetSample([0.0] * 2, ['1'] * 2, [1, 0], [[0.0], [1.0]])
        assert overlap_from_mask(sample, [False, False]).warnings == ["empty overlap region"]
        with pytest.raises(UsageError):
            overlap_from_mask(sample, [True])

    def test_standardized_mean_difference(self):
        treated = np.array([1.0, 3.0])
        control = np.array([0.0, 2.0])
        # both variances are 2, pooled sd is sqrt(2)
        assert standardized_mean_difference(treated, control) == pytest.approx(1.0 / math.sqrt(2.0))
        assert standardized_mean_difference(np.array([]), control) == 0.0
