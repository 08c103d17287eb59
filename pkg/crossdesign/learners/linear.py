"""Weighted (penalized) least-squares outcome regressions"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
from sklearn.neighbors import NearestNeighbors

from crossdesign.core.sample import TargetSample
from crossdesign.exceptions import FitError, RankDeficiencyError, UsageError
from crossdesign.learners.specs import (
    CUSTOM_DESIGN, ENSEMBLE, INTERACTIONS_QUADRATIC, KNN, MAIN_TERMS, RIDGE_CV, RIDGE_GRID,
    DesignBasis, RegressionSpec
)
from crossdesign.utils.rng import FOLD_STREAM, make_generator

logger = logging.getLogger(__name__)

TreatmentArg = Union[None, str, Sequence[str], np.ndarray]


def treatment_codes(levels: Sequence[str], a: TreatmentArg, n: int) -> Optional[np.ndarray]:
    """Dense codes for a single label, a label array or an integer code array"""
    if a is None:
        return None
    if isinstance(a, str):
        return np.full(n, list(levels).index(a), dtype=int)
    values = np.asarray(a)
    if values.dtype.kind in 'iu':
        return values.astype(int)
    lookup = {level: k for k, level in enumerate(levels)}
    return np.fromiter((lookup[str(v)] for v in values), dtype=int, count=values.shape[0])


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per row: a seeded shuffle followed by a block split"""
    order = make_generator(seed, FOLD_STREAM).permutation(n)
    labels = np.empty(n, dtype=int)
    for k, block in enumerate(np.array_split(order, folds)):
        labels[block] = k
    return labels


@dataclass
class WeightedNeighbours:
    """k-nearest-neighbour mean using the training units' sampling weights"""
    index: NearestNeighbors
    y: np.ndarray
    weight: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        _, rows = self.index.kneighbors(x)
        y, w = self.y[rows], self.weight[rows]
        total = w.sum(axis=1)
        weighted = np.sum(w * y, axis=1) / np.where(total > 0, total, 1.0)
        # all-zero neighbourhoods fall back to the plain mean
        return np.where(total > 0, weighted, y.mean(axis=1))


@dataclass
class FittedRegressor:
    """Fitted outcome regression Q(a, x)"""
    spec: RegressionSpec
    basis: Optional[DesignBasis]
    coefficients: Optional[np.ndarray]
    diagnostics: Dict[str, float] = field(default_factory=dict)
    member_weights: Optional[np.ndarray] = None
    members: Sequence['FittedRegressor'] = ()
    stack_weights: Optional[np.ndarray] = None
    member_failures: Dict[str, str] = field(default_factory=dict)
    _knn: Dict[int, WeightedNeighbours] = field(default_factory=dict, repr=False)

    @property
    def treatment_levels(self):
        return self.basis.treatment_levels if self.basis is not None else ()

    def predict(self, x: np.ndarray, a: TreatmentArg = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.spec.kind == ENSEMBLE:
            stacked = np.column_stack([m.predict(x, a) for m in self.members])
            return stacked @ self.member_weights
        codes = treatment_codes(self.treatment_levels, a, x.shape[0])
        if self.basis.use_treatment and codes is None:
            raise UsageError("this regression needs a treatment to predict")
        if self.spec.kind == KNN:
            return self._predict_knn(x, codes)
        return self.basis.matrix(x, codes) @ self.coefficients

    def _predict_knn(self, x: np.ndarray, codes: Optional[np.ndarray]) -> np.ndarray:
        out = np.empty(x.shape[0])
        groups = np.zeros(x.shape[0], dtype=int) if codes is None else codes
        for code in np.unique(groups):
            rows = groups == code
            model = self._knn.get(int(code))
            if model is None:
                raise FitError(f"no neighbours fitted for treatment code {code}")
            out[rows] = model.predict(x[rows])
        return out


def _solve(design: np.ndarray, y: np.ndarray, w: np.ndarray, penalty: float,
           penalty_mask: np.ndarray) -> np.ndarray:
    n, p = design.shape
    root_w = np.sqrt(w)
    lhs = design * root_w[:, None]
    rhs = y * root_w
    if penalty > 0:
        lhs = np.vstack([lhs, np.diag(np.sqrt(penalty * penalty_mask))])
        rhs = np.concatenate([rhs, np.zeros(p)])
    coef, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < p:
        raise RankDeficiencyError("singular normal equations", columns=p, rank=int(rank), n=n)
    return coef


def _fit_least_squares(sample: TargetSample, spec: RegressionSpec, basis: DesignBasis,
                       penalty: float) -> FittedRegressor:
    design = basis.matrix(sample.x, sample.a_codes)
    coef = _solve(design, sample.y, sample.weight, penalty, basis.penalty_mask(design.shape[1]))
    residual = sample.y - design @ coef
    return FittedRegressor(
        spec=spec, basis=basis, coefficients=coef,
        diagnostics={'rss': float(np.sum(sample.weight * residual ** 2)), 'n': sample.n,
                     'penalty': penalty},
    )


def _fit_ridge_cv(sample: TargetSample, spec: RegressionSpec, basis: DesignBasis) -> FittedRegressor:
    folds = min(3, sample.n)
    labels = fold_assignment(sample.n, folds, spec.fold_seed)
    design = basis.matrix(sample.x, sample.a_codes)
    mask = basis.penalty_mask(design.shape[1])
    risks = []
    for penalty in RIDGE_GRID:
        loss = 0.0
        for k in range(folds):
            train, test = labels != k, labels == k
            coef = _solve(design[train], sample.y[train], sample.weight[train], penalty, mask)
            loss += float(np.sum(sample.weight[test] * (sample.y[test] - design[test] @ coef) ** 2))
        risks.append(loss)
    best = RIDGE_GRID[int(np.argmin(risks))]
    fitted = _fit_least_squares(sample, spec, basis, best)
    fitted.diagnostics['cv_risk'] = min(risks) / max(sample.weight.sum(), 1e-300)
    return fitted


def _fit_knn(sample: TargetSample, spec: RegressionSpec, basis: DesignBasis) -> FittedRegressor:
    k = max(5, int(round(np.sqrt(sample.n))))
    groups = sample.a_codes if basis.use_treatment else np.zeros(sample.n, dtype=int)
    models = {}
    for code in np.unique(groups):
        rows = groups == code
        neighbours = min(k, int(rows.sum()))
        index = NearestNeighbors(n_neighbors=neighbours).fit(sample.x[rows])
        models[int(code)] = WeightedNeighbours(index, sample.y[rows], sample.weight[rows])
    return FittedRegressor(spec=spec, basis=basis, coefficients=None, _knn=models,
                           diagnostics={'n': sample.n, 'k': k})


def fit_outcome_regression(sample: TargetSample, spec: RegressionSpec,
                           use_treatment: bool = True) -> FittedRegressor:
    """Fit Q(a, x) (or a covariate-only regression) on the units of ``sample``.

    Fits are weighted by the sampling weights. ``main_terms`` uses
    [1, treatment indicators, x]; ``interactions_quadratic`` adds treatment by
    covariate interactions and squared covariates.
    """
    if sample.n == 0:
        raise FitError("cannot fit a regression on an empty subset")
    if spec.kind == ENSEMBLE:
        from crossdesign.learners.ensemble import fit_ensemble
        return fit_ensemble(sample, spec, use_treatment=use_treatment)

    basis = DesignBasis(spec, sample.covariate_names, sample.treatment_levels, use_treatment)
    if spec.kind in (MAIN_TERMS, INTERACTIONS_QUADRATIC, CUSTOM_DESIGN):
        return _fit_least_squares(sample, spec, basis, spec.ridge_penalty)
    if spec.kind == RIDGE_CV:
        return _fit_ridge_cv(sample, spec, basis)
    if spec.kind == KNN:
        return _fit_knn(sample, spec, basis)
    raise UsageError(f"unsupported outcome regression kind {spec.kind!r}")
