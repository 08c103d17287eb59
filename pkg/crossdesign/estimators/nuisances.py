"""Fitting every nuisance model the CCDS estimators need"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol

import numpy as np

from crossdesign.config import settings
from crossdesign.core.sample import OBS, RCT, TargetSample
from crossdesign.exceptions import SingleClassError, StratumError
from crossdesign.learners.linear import TreatmentArg, fit_outcome_regression
from crossdesign.learners.logistic import (
    OVERLAP_MEMBERSHIP, SELECTION, PropensityModel, fit_binary_propensity, fit_treatment_propensity
)
from crossdesign.learners.specs import RegressionSpec
from crossdesign.overlap.region import OverlapAssignment

logger = logging.getLogger(__name__)

STRATUM_RCT = 'rct'
STRATUM_OBS = 'obs'
STRATUM_RCT_OVERLAP = 'rct∩overlap'
STRATUM_OBS_OVERLAP = 'obs∩overlap'
STRATUM_OBS_NONOVERLAP = 'obs∩nonoverlap'


class Regressor(Protocol):
    def predict(self, x: np.ndarray, a: TreatmentArg = None) -> np.ndarray: ...


class Propensity(Protocol):
    def predict(self, x: np.ndarray, level=1) -> np.ndarray: ...


def stratum_masks(s: np.ndarray, r_overlap: np.ndarray) -> Dict[str, np.ndarray]:
    rct, obs = s == RCT, s == OBS
    return {
        STRATUM_RCT: rct,
        STRATUM_OBS: obs,
        STRATUM_RCT_OVERLAP: rct & r_overlap,
        STRATUM_OBS_OVERLAP: obs & r_overlap,
        STRATUM_OBS_NONOVERLAP: obs & ~r_overlap,
    }


def check_stratum(sample: TargetSample, mask: np.ndarray, stratum: str):
    """Raise when a stratum is empty or misses a treatment level"""
    if not mask.any():
        raise StratumError(f"empty stratum {stratum}", stratum)
    present = set(sample.a[mask].tolist())
    for level in sample.treatment_levels:
        if level not in present:
            raise StratumError(f"treatment {level} absent from stratum {stratum}", stratum, level)


@dataclass
class NuisanceSet:
    """Fitted outcome regressions and propensities keyed by stratum.

    ``q_obs_nonov`` is only needed by the alternative-decomposition estimators
    and is fitted on first use.
    """
    q_rct: Regressor
    q_obs: Regressor
    q_rct_ov: Regressor
    q_obs_ov: Regressor
    pi_s: Propensity
    pi_a_rct: Propensity
    pi_a_obs: Propensity
    pi_a_rct_ov: Propensity
    pi_a_obs_ov: Propensity
    pi_r_rct: Propensity
    pi_r_obs: Propensity
    overlap: OverlapAssignment
    trim_floor: float = settings.TRIM_FLOOR
    outcome_spec: Optional[RegressionSpec] = None
    propensity_spec: Optional[RegressionSpec] = None
    sample: Optional[TargetSample] = field(default=None, repr=False)
    q_obs_nonov: Optional[Regressor] = None
    warnings: List[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def r_overlap(self) -> np.ndarray:
        return self.overlap.r_overlap

    def obs_nonoverlap_regression(self) -> Regressor:
        """Q(S=0, a, R_obs-only=1, x), fitted lazily on observational nonoverlap units"""
        with self._lock:
            if self.q_obs_nonov is None:
                if self.sample is None or self.outcome_spec is None:
                    raise StratumError("no data to fit the observational nonoverlap regression",
                                       STRATUM_OBS_NONOVERLAP)
                mask = stratum_masks(self.sample.s, self.r_overlap)[STRATUM_OBS_NONOVERLAP]
                check_stratum(self.sample, mask, STRATUM_OBS_NONOVERLAP)
                self.q_obs_nonov = fit_outcome_regression(self.sample.subset(mask), self.outcome_spec)
            return self.q_obs_nonov

    def fingerprints(self) -> Dict[str, str]:
        prints = {}
        if self.outcome_spec is not None:
            prints['outcome'] = self.outcome_spec.fingerprint()
        if self.propensity_spec is not None:
            prints['propensity'] = self.propensity_spec.fingerprint()
        return prints


def _membership_propensity(group: TargetSample, r: np.ndarray, spec: RegressionSpec,
                           stratum: str, trim_floor: float, warnings: List[str]) -> PropensityModel:
    try:
        return fit_binary_propensity(group, r.astype(int), spec, OVERLAP_MEMBERSHIP, trim_floor)
    except SingleClassError:
        share = float(r.mean())
        message = f"overlap membership constant ({share:.0%}) in {stratum}, using a constant propensity"
        warnings.append(message)
        logger.warning(message)
        return PropensityModel.constant_model(OVERLAP_MEMBERSHIP, (0, 1), [1.0 - share, share], trim_floor)


def build_nuisances(sample: TargetSample, overlap: OverlapAssignment,
                    outcome_spec: RegressionSpec, propensity_spec: RegressionSpec,
                    pi_s: Optional[PropensityModel] = None,
                    selection_spec: Optional[RegressionSpec] = None,
                    trim_floor: float = settings.TRIM_FLOOR) -> NuisanceSet:
    """Fit the four outcome regressions and all propensities.

    ``pi_s`` can be passed in when it was already fitted for the overlap step.
    """
    masks = stratum_masks(sample.s, overlap.r_overlap)
    for stratum in (STRATUM_RCT, STRATUM_OBS, STRATUM_RCT_OVERLAP, STRATUM_OBS_OVERLAP):
        check_stratum(sample, masks[stratum], stratum)

    subsets = {name: sample.subset(masks[name]) for name in
               (STRATUM_RCT, STRATUM_OBS, STRATUM_RCT_OVERLAP, STRATUM_OBS_OVERLAP)}
    logger.info("Stratum sizes: " + ", ".join(f"{k}={v.n}" for k, v in subsets.items()))

    warnings: List[str] = []
    if pi_s is None:
        pi_s = fit_binary_propensity(sample, sample.s, selection_spec or propensity_spec,
                                     SELECTION, trim_floor)

    rct, obs = subsets[STRATUM_RCT], subsets[STRATUM_OBS]
    return NuisanceSet(
        q_rct=fit_outcome_regression(rct, outcome_spec),
        q_obs=fit_outcome_regression(obs, outcome_spec),
        q_rct_ov=fit_outcome_regression(subsets[STRATUM_RCT_OVERLAP], outcome_spec),
        q_obs_ov=fit_outcome_regression(subsets[STRATUM_OBS_OVERLAP], outcome_spec),
        pi_s=pi_s,
        pi_a_rct=fit_treatment_propensity(rct, propensity_spec, stratum=STRATUM_RCT, trim_floor=trim_floor),
        pi_a_obs=fit_treatment_propensity(obs, propensity_spec, stratum=STRATUM_OBS, trim_floor=trim_floor),
        pi_a_rct_ov=fit_treatment_propensity(subsets[STRATUM_RCT_OVERLAP], propensity_spec,
                                             stratum=STRATUM_RCT_OVERLAP, trim_floor=trim_floor),
        pi_a_obs_ov=fit_treatment_propensity(subsets[STRATUM_OBS_OVERLAP], propensity_spec,
                                             stratum=STRATUM_OBS_OVERLAP, trim_floor=trim_floor),
        pi_r_rct=_membership_propensity(rct, overlap.r_overlap[masks[STRATUM_RCT]], propensity_spec,
                                        STRATUM_RCT, trim_floor, warnings),
        pi_r_obs=_membership_propensity(obs, overlap.r_overlap[masks[STRATUM_OBS]], propensity_spec,
                                        STRATUM_OBS, trim_floor, warnings),
        overlap=overlap,
        trim_floor=trim_floor,
        outcome_spec=outcome_spec,
        propensity_spec=propensity_spec,
        sample=sample,
        warnings=warnings,
    )
