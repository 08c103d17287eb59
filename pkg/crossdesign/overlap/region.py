"""Overlap region between randomized and observational support on the selection score"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import logit

from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.exceptions import OverlapError, UsageError
from crossdesign.learners.logistic import PropensityModel

logger = logging.getLogger(__name__)

LOGIT = 'logit'
PROBABILITY = 'probability'
SMD_THRESHOLD = 0.25


@dataclass(frozen=True)
class OverlapParams:
    """Window width (alpha) and per-group count (beta), as fractions"""
    alpha_fraction: float = 0.01
    beta_fraction: float = 0.01
    scale: str = LOGIT

    def __post_init__(self):
        if not 0 < self.alpha_fraction < 1:
            raise UsageError(f"alpha_fraction must lie in (0, 1), got {self.alpha_fraction}")
        if not 0 < self.beta_fraction < 1:
            raise UsageError(f"beta_fraction must lie in (0, 1), got {self.beta_fraction}")
        if self.scale not in (LOGIT, PROBABILITY):
            raise UsageError(f"unknown overlap scale {self.scale!r}", valid=[LOGIT, PROBABILITY])

    @property
    def label(self) -> str:
        return f"{self.scale} {self.alpha_fraction:g}/{self.beta_fraction:g}"


# Window and count settings from narrow to wide, as reported for the base case
REFERENCE_GRID = (
    OverlapParams(0.01, 0.01, PROBABILITY),
    OverlapParams(0.01, 0.01, LOGIT),
    OverlapParams(0.02, 0.01, PROBABILITY),
    OverlapParams(0.02, 0.01, LOGIT),
    OverlapParams(0.10, 0.04, LOGIT),
)


@dataclass
class OverlapDiagnostics:
    pct_overlap_total: float
    pct_overlap_obs: float
    pct_overlap_rct: float
    smd: float
    large_extrapolation: bool

    def as_row(self, params: Optional[OverlapParams] = None) -> Dict[str, object]:
        row: Dict[str, object] = {}
        if params is not None:
            row.update({'alpha_fraction': params.alpha_fraction,
                        'beta_fraction': params.beta_fraction,
                        'scale': params.scale})
        row.update({'pct_overlap_obs': self.pct_overlap_obs,
                    'pct_overlap_rct': self.pct_overlap_rct,
                    'pct_overlap_total': self.pct_overlap_total,
                    'smd': self.smd})
        return row


@dataclass
class OverlapAssignment:
    """Per-unit overlap membership R_overlap with the resolved thresholds"""
    r_overlap: np.ndarray
    scores: np.ndarray
    resolved_alpha: float
    resolved_beta: int
    params: Optional[OverlapParams] = None
    propensity: Optional[np.ndarray] = None
    diagnostics: Optional[OverlapDiagnostics] = None
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.r_overlap.shape[0]

    def take(self, rows: np.ndarray) -> 'OverlapAssignment':
        """Membership carried over to resampled rows, thresholds unchanged"""
        rows = np.asarray(rows, dtype=int)
        return OverlapAssignment(
            r_overlap=self.r_overlap[rows], scores=self.scores[rows],
            resolved_alpha=self.resolved_alpha, resolved_beta=self.resolved_beta,
            params=self.params,
            propensity=None if self.propensity is None else self.propensity[rows],
        )


def window_counts(scores: np.ndarray, group_scores: np.ndarray, width: float) -> np.ndarray:
    """Number of ``group_scores`` inside the closed window of ``width`` centred at each score"""
    ordered = np.sort(group_scores)
    half = width / 2.0
    upper = np.searchsorted(ordered, scores + half, side='right')
    lower = np.searchsorted(ordered, scores - half, side='left')
    return upper - lower


def membership_from_scores(scores: np.ndarray, s: np.ndarray, resolved_alpha: float,
                           resolved_beta: int) -> np.ndarray:
    """Pointwise rule: a unit is in the overlap when its window holds at least
    ``resolved_beta`` units of each study group (itself included)"""
    scores = np.asarray(scores, dtype=float)
    s = np.asarray(s)
    rct = window_counts(scores, scores[s == RCT], resolved_alpha)
    obs = window_counts(scores, scores[s == OBS], resolved_alpha)
    return (rct >= resolved_beta) & (obs >= resolved_beta)


def overlap_diagnostics(assignment: OverlapAssignment, sample: TargetSample) -> OverlapDiagnostics:
    """Overlap fractions by group and the standardized mean difference of the selection propensity"""
    if len(assignment) != sample.n:
        raise UsageError("overlap assignment does not match the sample length")
    r = assignment.r_overlap
    rct, obs = sample.s == RCT, sample.s == OBS

    def pct(mask):
        return float(100.0 * r[mask].mean()) if mask.any() else 0.0

    propensity = assignment.propensity if assignment.propensity is not None else assignment.scores
    smd = standardized_mean_difference(propensity[rct], propensity[obs])
    return OverlapDiagnostics(
        pct_overlap_total=pct(np.ones(sample.n, dtype=bool)),
        pct_overlap_obs=pct(obs),
        pct_overlap_rct=pct(rct),
        smd=smd,
        large_extrapolation=bool(abs(smd) > SMD_THRESHOLD),
    )


def standardized_mean_difference(treated: np.ndarray, control: np.ndarray) -> float:
    """(mean1 - mean0) / sqrt((var1 + var0) / 2)"""
    if treated.size == 0 or control.size == 0:
        return 0.0
    m1, m0 = float(np.mean(treated)), float(np.mean(control))
    v1 = float(np.var(treated, ddof=1)) if treated.size > 1 else 0.0
    v0 = float(np.var(control, ddof=1)) if control.size > 1 else 0.0
    pooled = math.sqrt((v1 + v0) / 2.0)
    if pooled == 0.0:
        return 0.0 if m1 == m0 else math.copysign(math.inf, m1 - m0)
    return (m1 - m0) / pooled


def _resolve(sample: TargetSample, scores: np.ndarray, params: OverlapParams):
    spread = float(np.max(scores) - np.min(scores))
    if not spread > 0:
        raise OverlapError("constant selection propensity", {'scale': params.scale})
    resolved_alpha = params.alpha_fraction * spread
    resolved_beta = max(1, math.ceil(params.beta_fraction * min(sample.n_rct, sample.n_obs)))
    return resolved_alpha, resolved_beta


def assign_overlap(sample: TargetSample, pi_s: PropensityModel,
                   params: Optional[OverlapParams] = None) -> OverlapAssignment:
    """Estimate R_overlap from the trimmed selection propensity.

    Counts are plain unit counts; sampling weights do not enter.
    """
    params = params or OverlapParams()
    if sample.n_rct == 0 or sample.n_obs == 0:
        raise OverlapError("overlap needs both randomized and observational units",
                           {'n_rct': sample.n_rct, 'n_obs': sample.n_obs})
    propensity = pi_s.predict(sample.x, 1)
    scores = logit(propensity) if params.scale == LOGIT else propensity
    resolved_alpha, resolved_beta = _resolve(sample, scores, params)
    r_overlap = membership_from_scores(scores, sample.s, resolved_alpha, resolved_beta)

    assignment = OverlapAssignment(r_overlap, scores, resolved_alpha, resolved_beta,
                                   params=params, propensity=propensity)
    assignment.diagnostics = overlap_diagnostics(assignment, sample)
    if not r_overlap.any():
        assignment.warnings.append("empty overlap region")
        logger.warning(f"Overlap region is empty at {params.label}")
    logger.info(
        f"Overlap at {params.label}: obs {assignment.diagnostics.pct_overlap_obs:.1f}%, "
        f"rct {assignment.diagnostics.pct_overlap_rct:.1f}% (alpha={resolved_alpha:.4g}, beta={resolved_beta})"
    )
    return assignment


@dataclass(frozen=True)
class CovariateBoundsRule:
    """Known overlap region lower < x[column] < upper, used for oracle-overlap runs"""
    column: str
    lower: float
    upper: float

    def membership(self, sample: TargetSample) -> np.ndarray:
        values = sample.covariate(self.column)
        return (values > self.lower) & (values < self.upper)


def overlap_from_mask(sample: TargetSample, r_overlap: np.ndarray) -> OverlapAssignment:
    """Assignment from a known membership vector"""
    r_overlap = np.asarray(r_overlap, dtype=bool)
    if r_overlap.shape[0] != sample.n:
        raise UsageError("overlap mask does not match the sample length")
    assignment = OverlapAssignment(r_overlap, np.zeros(sample.n), resolved_alpha=0.0, resolved_beta=0)
    if not r_overlap.any():
        assignment.warnings.append("empty overlap region")
    return assignment
