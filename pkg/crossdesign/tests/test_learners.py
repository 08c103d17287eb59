"""Tests for regression specifications, outcome regressions and propensity models"""
import numpy as np
import pytest

from crossdesign.core.sample import RCT, TargetSample
from crossdesign.exceptions import (
    DesignError, EnsembleError, FitError, RankDeficiencyError, SingleClassError, StratumError, UsageError
)
from crossdesign.learners.ensemble import _refit_members, fit_ensemble, simplex_nnls
from crossdesign.learners.linear import fit_outcome_regression, fold_assignment, treatment_codes
from crossdesign.learners.logistic import (
    FALLBACK_RIDGE, PropensityModel, fit_binary_propensity, fit_treatment_propensity, trim_probability
)
from crossdesign.learners.specs import (
    DesignBasis, RegressionSpec, indicator_name, mentions_treatment, read_design_file, spec_from_token
)
from crossdesign.utils.rng import make_generator


class TestRegressionSpec:
    def test_tokens(self):
        assert spec_from_token('main-terms') == RegressionSpec.main_terms()
        assert spec_from_token('interactions-quadratic', ridge_penalty=0.5).ridge_penalty == 0.5
        assert spec_from_token('ensemble').kind == 'ensemble'

    def test_unknown_token_lists_valid(self):
        with pytest.raises(UsageError) as exc:
            spec_from_token('lasso')
        assert 'main-terms' in exc.value.details['valid']
        assert "valid:" in str(exc.value)

    def test_custom_design_file(self, tmp_path):
        path = tmp_path / 'design.txt'
        path.write_text("# basis\n1\nx1   # linear\n\nx1 ** 2\n")
        assert read_design_file(path) == ('1', 'x1', 'x1 ** 2')
        spec = spec_from_token(f"custom:{path}")
        assert spec.design == ('1', 'x1', 'x1 ** 2')
        assert spec.name == 'custom:design.txt'

    def test_fingerprint_is_stable(self):
        assert RegressionSpec.main_terms().fingerprint() == RegressionSpec.main_terms().fingerprint()
        assert RegressionSpec.main_terms().fingerprint() != RegressionSpec.main_terms(0.1).fingerprint()

    def test_validation(self):
        with pytest.raises(UsageError):
            RegressionSpec.main_terms(ridge_penalty=-1.0)
        with pytest.raises(UsageError):
            RegressionSpec.custom(())
        with pytest.raises(UsageError):
            RegressionSpec.ensemble(members=[RegressionSpec.main_terms()])

    def test_without_treatment(self):
        spec = RegressionSpec.custom(['1', 'a_2', 'x1', 'a_2 * x1'])
        assert spec.without_treatment().design == ('1', 'x1')
        assert RegressionSpec.custom(['a_2']).without_treatment().design == ('1',)
        assert mentions_treatment('a_2 * x1')
        assert not mentions_treatment('x1 * x2')
        assert indicator_name('drug B') == 'a_drug_B'


class TestDesignBasis:
    def test_main_terms_layout(self):
        basis = DesignBasis(RegressionSpec.main_terms(), ('x1', 'x2'), ('1', '2', '3'))
        x = np.array([[0.5, -1.0], [2.0, 3.0]])
        design = basis.matrix(x, np.array([0, 2]))
        assert design.tolist() == [[1, 0, 0, 0.5, -1.0], [1, 0, 1, 2.0, 3.0]]

    def test_interactions_width(self):
        basis = DesignBasis(RegressionSpec.interactions_quadratic(), ('x1', 'x2'), ('1', '2'))
        assert basis.matrix(np.ones((3, 2)), np.array([0, 1, 1])).shape == (3, 8)
        covariates_only = DesignBasis(RegressionSpec.interactions_quadratic(), ('x1', 'x2'), ('1', '2'),
                                      use_treatment=False)
        assert covariates_only.matrix(np.ones((3, 2))).shape == (3, 5)

    def test_custom_expressions(self):
        spec = RegressionSpec.custom(['1', 'x1 * x2', 'a_2'])
        basis = DesignBasis(spec, ('x1', 'x2'), ('1', '2'))
        design = basis.matrix(np.array([[2.0, 3.0], [1.0, -1.0]]), np.array([1, 0]))
        assert design.tolist() == [[1.0, 6.0, 1.0], [1.0, -1.0, 0.0]]

    def test_bad_expression(self):
        basis = DesignBasis(RegressionSpec.custom(['x9']), ('x1',), ('1', '2'), use_treatment=False)
        with pytest.raises(DesignError):
            basis.matrix(np.ones((2, 1)))

    def test_needs_treatment_codes(self):
        basis = DesignBasis(RegressionSpec.main_terms(), ('x1',), ('1', '2'))
        with pytest.raises(UsageError):
            basis.matrix(np.ones((2, 1)))


class TestOutcomeRegression:
    def test_recovers_linear_truth(self, linear_sample):
        sample, _ = linear_sample
        rct = sample.subset(sample.s == RCT)
        fitted = fit_outcome_regression(rct, RegressionSpec.main_terms())
        assert fitted.coefficients == pytest.approx([1.0, 2.0, 1.0, -1.0], abs=1e-9)

    def test_predict_argument_forms(self, linear_sample):
        sample, _ = linear_sample
        fitted = fit_outcome_regression(sample, RegressionSpec.main_terms())
        x = sample.x[:5]
        by_label = fitted.predict(x, '2')
        assert np.allclose(by_label, fitted.predict(x, ['2'] * 5))
        assert np.allclose(by_label, fitted.predict(x, np.ones(5, dtype=int)))

    def test_rank_deficient_design(self):
        x = np.column_stack([np.arange(6.0), np.arange(6.0)])
        sample = TargetSample(np.arange(6.0), ['1', '2'] * 3, [1] * 6, x)
        with pytest.raises(RankDeficiencyError) as exc:
            fit_outcome_regression(sample, RegressionSpec.main_terms())
        assert "ridge_penalty > 0" in str(exc.value)
        ridge = fit_outcome_regression(sample, RegressionSpec.main_terms(ridge_penalty=0.1))
        assert np.all(np.isfinite(ridge.coefficients))

    def test_empty_subset(self, linear_sample):
        sample, _ = linear_sample
        with pytest.raises(FitError):
            fit_outcome_regression(sample.subset(np.zeros(sample.n, dtype=bool)), RegressionSpec.main_terms())

    def test_weights_enter_the_fit(self):
        sample = TargetSample([0.0, 10.0], ['1', '1'], [1, 1], [[0.0], [0.0]],
                              weight=[3.0, 1.0], treatment_levels=['1'])
        fitted = fit_outcome_regression(sample, RegressionSpec.intercept_only(), use_treatment=False)
        assert fitted.predict(np.zeros((1, 1)))[0] == pytest.approx(2.5)

    def test_fold_assignment_is_seeded(self):
        first = fold_assignment(50, 5, seed=3)
        assert np.array_equal(first, fold_assignment(50, 5, seed=3))
        assert sorted(np.bincount(first).tolist()) == [10] * 5

    def test_treatment_codes(self):
        assert treatment_codes(('a', 'b'), 'b', 3).tolist() == [1, 1, 1]
        assert treatment_codes(('a', 'b'), None, 3) is None


class TestEnsemble:
    def test_simplex_weights(self):
        rng = make_generator(5)
        y = rng.normal(size=200)
        predictions = np.column_stack([y, rng.normal(size=200), np.zeros(200)])
        weights = simplex_nnls(predictions, y, np.ones(200))
        assert weights.sum() == pytest.approx(1.0)
        assert np.all(weights >= 0)
        assert weights[0] == pytest.approx(1.0, abs=1e-3)

    def test_stacked_regression(self, noisy_sample):
        sample, _ = noisy_sample
        fitted = fit_ensemble(sample, RegressionSpec.ensemble(folds=3))
        assert fitted.member_weights.sum() == pytest.approx(1.0)
        assert fitted.stack_weights.shape == (4,)
        assert fitted.predict(sample.x[:7], '1').shape == (7,)
        assert fitted.diagnostics['failed_members'] == 0.0

    def test_too_few_units(self):
        sample = TargetSample(np.arange(5.0), ['1'] * 5, [1] * 5, np.arange(5.0)[:, None])
        with pytest.raises(UsageError):
            fit_ensemble(sample, RegressionSpec.ensemble(folds=5), use_treatment=False)

    def test_simplex_constraint_is_exact(self):
        """Unconstrained NNLS would put half the mass on the doubled column"""
        y = make_generator(6).normal(size=100)
        predictions = np.column_stack([2.0 * y, np.zeros(100)])
        weights = simplex_nnls(predictions, y, np.ones(100))
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert weights == pytest.approx([0.5, 0.5], abs=1e-4)

    def test_member_failing_on_full_data_is_dropped(self):
        members = (RegressionSpec.main_terms(), RegressionSpec.interactions_quadratic(), RegressionSpec('knn'))
        weights = np.array([0.5, 0.3, 0.2])
        failures = {}

        def fit(member):
            if member.kind == 'main_terms':
                raise FitError("singular on the full data")
            return member.kind

        fitted, member_weights = _refit_members(members, weights, fit, failures)
        assert fitted == ['interactions_quadratic', 'knn']
        assert member_weights == pytest.approx([0.6, 0.4])
        assert weights == pytest.approx([0.0, 0.6, 0.4])
        assert failures['0:main_terms'].startswith('full-data refit')

    def test_every_refit_failing(self):
        def fit(member):
            raise FitError("singular on the full data")

        with pytest.raises(EnsembleError):
            _refit_members((RegressionSpec.main_terms(),), np.array([1.0]), fit, {})

    def test_nearest_neighbours_use_sampling_weights(self):
        x = np.arange(10.0)
        weight = np.ones(10)
        weight[4] = 4.0
        sample = TargetSample(x, ['1'] * 10, [1] * 10, x[:, None], weight=weight)
        fitted = fit_outcome_regression(sample, RegressionSpec('knn'), use_treatment=False)
        # five nearest units to 2.0 are 0..4
        assert fitted.predict(np.array([[2.0]]))[0] == pytest.approx(22.0 / 8.0)

    def test_probability_ensemble(self, noisy_sample):
        sample, _ = noisy_sample
        model = fit_binary_propensity(sample, sample.s, RegressionSpec.ensemble(folds=3))
        p = model.predict(sample.x)
        assert np.all((p >= 0.001) & (p <= 0.999))
        assert model.member_weights.sum() == pytest.approx(1.0)
        assert all(m.spec.kind != 'knn' for m in model.members)


class TestPropensity:
    def test_trim(self):
        assert trim_probability(np.array([0.0, 0.5, 1.0])) == pytest.approx([0.001, 0.5, 0.999])
        assert trim_probability(0.0004) == 0.001
        with pytest.raises(UsageError):
            trim_probability(0.5, floor=0.6)

    def test_recovers_logistic_coefficients(self):
        rng = make_generator(21)
        x = rng.normal(size=(20000, 1))
        label = (rng.random(20000) < 1.0 / (1.0 + np.exp(-(-0.5 + 1.2 * x[:, 0])))).astype(int)
        sample = TargetSample(np.zeros(20000), ['1'] * 20000, label, x)
        model = fit_binary_propensity(sample, label, RegressionSpec.main_terms())
        assert model.coefficients[:, 0] == pytest.approx([-0.5, 1.2], abs=0.08)
        assert model.diagnostics['converged'] == 1.0

    def test_single_class(self, linear_sample):
        sample, _ = linear_sample
        with pytest.raises(SingleClassError):
            fit_binary_propensity(sample, np.ones(sample.n), RegressionSpec.main_terms())

    def test_separated_labels_use_fallback_ridge(self):
        x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        sample = TargetSample(np.zeros(4), ['1'] * 4, [0, 0, 1, 1], x)
        model = fit_binary_propensity(sample, np.array([0, 0, 1, 1]), RegressionSpec.main_terms())
        assert model.diagnostics['penalty'] == FALLBACK_RIDGE
        p = model.predict(x)
        assert p[0] < 0.01 and p[3] > 0.99

    def test_treatment_model_rows_sum_to_one(self, noisy_sample):
        sample, _ = noisy_sample
        model = fit_treatment_propensity(sample, RegressionSpec.main_terms())
        probs = model.probabilities(sample.x)
        assert probs.shape == (sample.n, 2)
        assert np.allclose(probs.sum(axis=1), 1.0)
        assert np.allclose(model.predict(sample.x, '2'), probs[:, 1])

    def test_absent_level(self, linear_sample):
        sample, _ = linear_sample
        only_one = sample.subset(sample.a == '1')
        with pytest.raises(StratumError) as exc:
            fit_treatment_propensity(only_one, RegressionSpec.main_terms(), stratum='rct')
        assert str(exc.value) == "treatment 2 absent from stratum rct"

    def test_constant_model(self):
        model = PropensityModel.constant_model('overlap_membership', (0, 1), [1.0, 3.0])
        assert model.predict(np.zeros((2, 3))).tolist() == [0.75, 0.75]
