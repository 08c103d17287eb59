"""Logistic and multinomial propensity models fit by Newton iterations"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp, softmax

from crossdesign.config import settings
from crossdesign.core.sample import TargetSample
from crossdesign.exceptions import ConvergenceError, SingleClassError, StratumError, UsageError
from crossdesign.learners.specs import ENSEMBLE, KNN, RIDGE_CV, DesignBasis, RegressionSpec

logger = logging.getLogger(__name__)

MAX_ITER = 100
TOLERANCE = 1e-8
FALLBACK_RIDGE = 1e-6
MAX_HALVINGS = 40
# Probability-model members of a propensity ensemble use this ridge
ENSEMBLE_RIDGE = 1.0

SELECTION = 'selection'
TREATMENT = 'treatment'
OVERLAP_MEMBERSHIP = 'overlap_membership'


def trim_probability(p: Union[float, np.ndarray], floor: float = settings.TRIM_FLOOR):
    """Clamp probabilities (or products of probabilities) to [floor, 1 - floor]"""
    if not 0 < floor < 0.5:
        raise UsageError(f"trim floor must lie in (0, 0.5), got {floor}")
    clipped = np.clip(p, floor, 1.0 - floor)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


@dataclass
class NewtonResult:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    max_change: float
    gradient_norm: float
    penalty: float


def _penalized_loglik(eta_full: np.ndarray, onehot: np.ndarray, w: np.ndarray,
                      beta: np.ndarray, penalty: float, mask: np.ndarray) -> float:
    loglik = np.sum(w * (np.sum(onehot * eta_full, axis=1) - logsumexp(eta_full, axis=1)))
    return float(loglik - 0.5 * penalty * np.sum(mask[:, None] * beta ** 2))


def newton_multinomial(design: np.ndarray, codes: np.ndarray, levels: int, w: np.ndarray,
                       penalty: float = 0.0, mask: Optional[np.ndarray] = None,
                       max_iter: int = MAX_ITER, tol: float = TOLERANCE) -> NewtonResult:
    """Maximise the (ridge-penalized) multinomial log likelihood.

    The first level is the reference. With two levels this is ordinary
    logistic regression solved by iteratively reweighted least squares.
    Steps are halved until the penalized likelihood does not decrease.
    """
    n, p = design.shape
    m = levels - 1
    mask = np.ones(p) if mask is None else mask
    onehot = (codes[:, None] == np.arange(levels)[None, :]).astype(float)
    beta = np.zeros((p, m))

    def full_eta(b):
        return np.hstack([np.zeros((n, 1)), design @ b])

    current = _penalized_loglik(full_eta(beta), onehot, w, beta, penalty, mask)
    max_change = np.inf
    gradient_norm = np.inf
    for iteration in range(1, max_iter + 1):
        probs = softmax(full_eta(beta), axis=1)[:, 1:]
        resid = onehot[:, 1:] - probs
        gradient = design.T @ (w[:, None] * resid) - penalty * mask[:, None] * beta
        hessian = np.zeros((p * m, p * m))
        for j in range(m):
            for k in range(j, m):
                cross = probs[:, j] * ((j == k) - probs[:, k])
                block = design.T @ (design * (w * cross)[:, None])
                hessian[j * p:(j + 1) * p, k * p:(k + 1) * p] = block
                hessian[k * p:(k + 1) * p, j * p:(j + 1) * p] = block
        hessian += np.diag(np.tile(penalty * mask, m))
        gradient_norm = float(np.max(np.abs(gradient)))
        try:
            step = np.linalg.solve(hessian, gradient.T.reshape(-1)).reshape(m, p).T
        except np.linalg.LinAlgError:
            return NewtonResult(beta, False, iteration, max_change, gradient_norm, penalty)
        if not np.all(np.isfinite(step)):
            return NewtonResult(beta, False, iteration, max_change, gradient_norm, penalty)

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = beta + scale * step
            value = _penalized_loglik(full_eta(candidate), onehot, w, candidate, penalty, mask)
            if value >= current - 1e-12 * (1.0 + abs(current)):
                break
            scale *= 0.5
        max_change = float(np.max(np.abs(scale * step)))
        beta, current = candidate, value
        if max_change < tol:
            probs = softmax(full_eta(beta), axis=1)[:, 1:]
            gradient = design.T @ (w[:, None] * (onehot[:, 1:] - probs)) - penalty * mask[:, None] * beta
            return NewtonResult(beta, True, iteration, max_change, float(np.max(np.abs(gradient))), penalty)
    return NewtonResult(beta, False, max_iter, max_change, gradient_norm, penalty)


def fit_newton_with_fallback(design: np.ndarray, codes: np.ndarray, levels: int, w: np.ndarray,
                             penalty: float, mask: np.ndarray, context: str) -> NewtonResult:
    """Unpenalized Newton first, then a small ridge on singular or separated data"""
    rank = np.linalg.matrix_rank(design * np.sqrt(w)[:, None]) if design.size else 0
    result = None
    if penalty > 0 or rank == design.shape[1]:
        result = newton_multinomial(design, codes, levels, w, penalty, mask)
        if result.converged:
            return result
    fallback = max(penalty, FALLBACK_RIDGE)
    logger.warning(f"{context}: Newton iterations singular or not converging, "
                   f"refitting with ridge {fallback:g}")
    result = newton_multinomial(design, codes, levels, w, fallback, mask)
    if not result.converged:
        raise ConvergenceError(f"{context}: no convergence under fallback ridge {fallback:g}",
                               iterations=result.iterations, max_change=result.max_change,
                               gradient_norm=result.gradient_norm, penalty=fallback)
    return result


@dataclass
class PropensityModel:
    """Fitted probability model over ``levels`` of a categorical target.

    Binary targets (selection, overlap membership) use levels (0, 1) and
    ``predict`` returns the probability of level 1. Treatment models use the
    sample's treatment labels. Predictions are trimmed per level at
    ``trim_floor`` and renormalised.
    """
    target: str
    levels: Tuple
    spec: Optional[RegressionSpec]
    basis: Optional[DesignBasis]
    coefficients: Optional[np.ndarray]
    trim_floor: float = settings.TRIM_FLOOR
    diagnostics: Dict[str, float] = field(default_factory=dict)
    constant: Optional[np.ndarray] = None
    members: Sequence['PropensityModel'] = ()
    member_weights: Optional[np.ndarray] = None

    @classmethod
    def constant_model(cls, target: str, levels: Sequence, probabilities: Sequence[float],
                       trim_floor: float = settings.TRIM_FLOOR) -> 'PropensityModel':
        probs = np.asarray(probabilities, dtype=float)
        return cls(target, tuple(levels), None, None, None, trim_floor,
                   diagnostics={'constant': 1.0}, constant=probs / probs.sum())

    def raw_probabilities(self, x: np.ndarray) -> np.ndarray:
        """Untrimmed probabilities, one column per level, rows sum to 1"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.constant is not None:
            return np.tile(self.constant, (x.shape[0], 1))
        if self.members:
            stacked = np.stack([m.raw_probabilities(x) for m in self.members], axis=2)
            return stacked @ self.member_weights
        eta = self.basis.matrix(x) @ self.coefficients
        return softmax(np.hstack([np.zeros((x.shape[0], 1)), eta]), axis=1)

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        probs = trim_probability(self.raw_probabilities(x), self.trim_floor)
        return probs / probs.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray, level=1) -> np.ndarray:
        """Trimmed probability of ``level`` at each row of ``x``"""
        try:
            column = self.levels.index(level if not isinstance(level, np.generic) else level.item())
        except ValueError:
            column = [str(v) for v in self.levels].index(str(level))
        return self.probabilities(x)[:, column]


def _member_design_spec(spec: RegressionSpec) -> RegressionSpec:
    # Outcome-only member kinds map onto a penalized logistic form
    if spec.kind == RIDGE_CV:
        return RegressionSpec.interactions_quadratic(ridge_penalty=ENSEMBLE_RIDGE)
    return spec


def fit_probability_model(sample: TargetSample, codes: np.ndarray, levels: Sequence,
                          spec: RegressionSpec, target: str,
                          trim_floor: float = settings.TRIM_FLOOR) -> PropensityModel:
    """Shared fitting path for binary and multinomial targets on covariates only"""
    if spec.kind == ENSEMBLE:
        from crossdesign.learners.ensemble import fit_probability_ensemble
        return fit_probability_ensemble(sample, codes, levels, spec, target, trim_floor)
    if spec.kind == KNN:
        raise UsageError("nearest-neighbour members are not available for propensity models")
    spec = _member_design_spec(spec)
    basis = DesignBasis(spec, sample.covariate_names, sample.treatment_levels, use_treatment=False)
    design = basis.matrix(sample.x)
    mask = basis.penalty_mask(design.shape[1])
    result = fit_newton_with_fallback(design, codes, len(levels), sample.weight,
                                      spec.ridge_penalty, mask, context=f"{target} propensity")
    return PropensityModel(
        target=target, levels=tuple(levels), spec=spec, basis=basis,
        coefficients=result.coefficients, trim_floor=trim_floor,
        diagnostics={'iterations': result.iterations, 'converged': float(result.converged),
                     'penalty': result.penalty, 'gradient_norm': result.gradient_norm,
                     'n': sample.n},
    )


def fit_binary_propensity(sample: TargetSample, label: np.ndarray, spec: RegressionSpec,
                          target: str = SELECTION,
                          trim_floor: float = settings.TRIM_FLOOR) -> PropensityModel:
    """Logistic model for P(label = 1 | x)"""
    label = np.asarray(label).astype(int)
    if label.shape[0] != sample.n:
        raise UsageError("label length does not match the subset")
    present = set(np.unique(label).tolist())
    if present != {0, 1}:
        raise SingleClassError(f"{target} propensity needs both label values, got {sorted(present)}",
                               details={'target': target, 'n': sample.n})
    return fit_probability_model(sample, label, (0, 1), spec, target, trim_floor)


def fit_treatment_propensity(sample: TargetSample, spec: RegressionSpec,
                             levels: Optional[Sequence[str]] = None,
                             stratum: str = 'sample',
                             trim_floor: float = settings.TRIM_FLOOR) -> PropensityModel:
    """Multinomial model for P(A = a | x) over the declared treatment levels"""
    levels = tuple(levels or sample.treatment_levels)
    present = set(sample.a.tolist())
    for level in levels:
        if level not in present:
            raise StratumError(f"treatment {level} absent from stratum {stratum}", stratum, level)
    if len(levels) < 2:
        raise SingleClassError(f"treatment propensity needs two or more levels in {stratum}")
    lookup = {level: k for k, level in enumerate(levels)}
    codes = np.fromiter((lookup[v] for v in sample.a), dtype=int, count=sample.n)
    return fit_probability_model(sample, codes, levels, spec, TREATMENT, trim_floor)
