"""Cross-validated stacking over small regression libraries"""
import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, nnls

from crossdesign.config import settings
from crossdesign.core.sample import TargetSample
from crossdesign.exceptions import CrossDesignError, EnsembleError, UsageError
from crossdesign.learners.linear import FittedRegressor, fit_outcome_regression, fold_assignment
from crossdesign.learners.logistic import PropensityModel, fit_probability_model
from crossdesign.learners.specs import ENSEMBLE, KNN, DesignBasis, RegressionSpec

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


def simplex_nnls(predictions: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares stacking weights on the simplex.

    NNLS gives the starting point; SLSQP then solves with the sum-to-one
    equality as an explicit constraint.
    """
    k = predictions.shape[1]
    uniform = np.full(k, 1.0 / k)
    if k == 1:
        return np.ones(1)
    root_w = np.sqrt(w)
    design = predictions * root_w[:, None]
    target = y * root_w
    scale = max(float(target @ target), 1.0)

    def loss(alpha: np.ndarray) -> float:
        residual = target - design @ alpha
        return float(residual @ residual) / scale

    def gradient(alpha: np.ndarray) -> np.ndarray:
        return -2.0 * design.T @ (target - design @ alpha) / scale

    start, _ = nnls(design, target)
    start = start / start.sum() if start.sum() > 0 else uniform
    result = minimize(loss, start, jac=gradient, method='SLSQP', bounds=[(0.0, 1.0)] * k,
                      constraints=[{'type': 'eq', 'fun': lambda alpha: np.sum(alpha) - 1.0,
                                    'jac': lambda alpha: np.ones(k)}],
                      options={'ftol': 1e-12, 'maxiter': 200})
    weights = np.clip(result.x, 0.0, None)
    weights = weights / weights.sum() if weights.sum() > 0 else uniform
    return weights if loss(weights) <= loss(start) else start


def _refit_members(members: Sequence[RegressionSpec], weights: np.ndarray, fit: Callable,
                   failures: Dict[str, str]) -> Tuple[List, np.ndarray]:
    """Refit the weighted members on all units.

    A member that fails here is dropped and the remaining weights are
    renormalised; ``weights`` is updated in place.
    """
    fitted, kept = [], []
    for j in np.flatnonzero(weights > 0):
        name = _member_name(members[j], j)
        try:
            fitted.append(fit(members[j]))
            kept.append(weights[j])
        except (CrossDesignError, ValueError, np.linalg.LinAlgError) as e:
            failures[name] = f"full-data refit: {e}"
            weights[j] = 0.0
            logger.warning(f"Ensemble member {name} failed on the full data, dropped: {e}")
    if not fitted:
        raise EnsembleError("every weighted ensemble member failed on the full data", failures)
    weights /= weights.sum()
    kept = np.asarray(kept)
    return fitted, kept / kept.sum()


def _check_size(sample: TargetSample, spec: RegressionSpec):
    if spec.kind != ENSEMBLE:
        raise UsageError("fit_ensemble needs an ensemble specification")
    if sample.n < 2 * spec.ensemble_folds:
        raise UsageError(f"ensemble with {spec.ensemble_folds} folds needs at least "
                         f"{2 * spec.ensemble_folds} units, got {sample.n}")


def _member_name(member: RegressionSpec, position: int) -> str:
    return f"{position}:{member.name}"


def fit_ensemble(sample: TargetSample, spec: RegressionSpec, use_treatment: bool = True) -> FittedRegressor:
    """V-fold stacking of outcome regressions under squared loss.

    A member that fails on any fold gets weight zero. When the stacked
    combination does not beat the best single member on cross-validated risk,
    the single member takes all the weight.
    """
    _check_size(sample, spec)
    labels = fold_assignment(sample.n, spec.ensemble_folds, spec.fold_seed)
    members = spec.ensemble_members
    out_of_fold = np.zeros((sample.n, len(members)))
    failures: Dict[str, str] = {}

    for j, member in enumerate(members):
        name = _member_name(member, j)
        try:
            for k in range(spec.ensemble_folds):
                train = sample.subset(labels != k)
                test = labels == k
                fitted = fit_outcome_regression(train, member, use_treatment)
                codes = sample.a_codes[test] if use_treatment else None
                out_of_fold[test, j] = fitted.predict(sample.x[test], codes)
        except (CrossDesignError, ValueError, np.linalg.LinAlgError) as e:
            failures[name] = str(e)
            logger.warning(f"Ensemble member {name} failed during cross-validation, weight set to 0: {e}")

    working = [j for j, m in enumerate(members) if _member_name(m, j) not in failures]
    if not working:
        raise EnsembleError("every ensemble member failed", failures)

    w = sample.weight
    total_w = max(float(w.sum()), 1e-300)
    risks = np.array([np.sum(w * (sample.y - out_of_fold[:, j]) ** 2) / total_w for j in working])
    stack = simplex_nnls(out_of_fold[:, working], sample.y, w)
    stack_risk = float(np.sum(w * (sample.y - out_of_fold[:, working] @ stack) ** 2) / total_w)
    if stack_risk > risks.min():
        stack = np.zeros(len(working))
        stack[int(np.argmin(risks))] = 1.0
        stack_risk = float(risks.min())

    weights = np.zeros(len(members))
    weights[working] = stack
    refit, member_weights = _refit_members(
        members, weights, lambda member: fit_outcome_regression(sample, member, use_treatment), failures)

    basis = DesignBasis(spec, sample.covariate_names, sample.treatment_levels, use_treatment)
    diagnostics = {'cv_risk': stack_risk, 'n': sample.n}
    diagnostics.update({f"cv_risk[{_member_name(members[j], j)}]": float(r) for j, r in zip(working, risks)})
    diagnostics['failed_members'] = float(len(failures))
    return FittedRegressor(spec=spec, basis=basis, coefficients=None, diagnostics=diagnostics,
                           member_weights=member_weights, members=refit,
                           stack_weights=weights, member_failures=failures)


def _log_loss(probabilities: np.ndarray, codes: np.ndarray, w: np.ndarray) -> float:
    picked = probabilities[np.arange(codes.shape[0]), codes]
    return float(-np.sum(w * np.log(np.maximum(picked, LOG_FLOOR))) / max(float(w.sum()), 1e-300))


def fit_probability_ensemble(sample: TargetSample, codes: np.ndarray, levels: Sequence,
                             spec: RegressionSpec, target: str,
                             trim_floor: float = settings.TRIM_FLOOR) -> PropensityModel:
    """V-fold stacking of probability models under log loss on the simplex"""
    _check_size(sample, spec)
    labels = fold_assignment(sample.n, spec.ensemble_folds, spec.fold_seed)
    # Nearest-neighbour members only apply to outcome regressions
    members = tuple(m for m in spec.ensemble_members if m.kind != KNN)
    out_of_fold = np.zeros((sample.n, len(levels), len(members)))
    failures: Dict[str, str] = {}

    for j, member in enumerate(members):
        name = _member_name(member, j)
        try:
            for k in range(spec.ensemble_folds):
                train_rows = labels != k
                test = labels == k
                train_codes = codes[train_rows]
                if np.unique(train_codes).shape[0] < len(levels):
                    raise EnsembleError(f"fold {k} lacks a level", {})
                fitted = fit_probability_model(sample.subset(train_rows), train_codes, levels,
                                               member, target, trim_floor)
                out_of_fold[test, :, j] = fitted.raw_probabilities(sample.x[test])
        except (CrossDesignError, ValueError, np.linalg.LinAlgError) as e:
            failures[name] = str(e)
            logger.warning(f"Probability member {name} failed during cross-validation, weight set to 0: {e}")

    working = [j for j, m in enumerate(members) if _member_name(m, j) not in failures]
    if not working:
        raise EnsembleError("every probability ensemble member failed", failures)

    w = sample.weight
    risks = np.array([_log_loss(out_of_fold[:, :, j], codes, w) for j in working])
    if len(working) == 1:
        stack = np.ones(1)
    else:
        start = np.full(len(working), 1.0 / len(working))
        result = minimize(
            lambda alpha: _log_loss(out_of_fold[:, :, working] @ alpha, codes, w),
            start, method='SLSQP', bounds=[(0.0, 1.0)] * len(working),
            constraints=[{'type': 'eq', 'fun': lambda alpha: np.sum(alpha) - 1.0}],
        )
        stack = np.clip(result.x, 0.0, None)
        stack = stack / stack.sum() if stack.sum() > 0 else start
        if _log_loss(out_of_fold[:, :, working] @ stack, codes, w) > risks.min():
            stack = np.zeros(len(working))
            stack[int(np.argmin(risks))] = 1.0

    weights = np.zeros(len(members))
    weights[working] = stack
    refit, member_weights = _refit_members(
        members, weights,
        lambda member: fit_probability_model(sample, codes, levels, member, target, trim_floor), failures)
    return PropensityModel(
        target=target, levels=tuple(levels), spec=spec, basis=None, coefficients=None,
        trim_floor=trim_floor, members=refit, member_weights=member_weights,
        diagnostics={'cv_log_loss': float(min(risks.min(), _log_loss(
            out_of_fold[:, :, working] @ stack, codes, w))), 'n': sample.n,
            'failed_members': float(len(failures))},
    )
