"""Regression specifications and design-matrix construction"""
import hashlib
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from crossdesign.config import settings
from crossdesign.exceptions import DesignError, UsageError

logger = logging.getLogger(__name__)

MAIN_TERMS = 'main_terms'
INTERACTIONS_QUADRATIC = 'interactions_quadratic'
CUSTOM_DESIGN = 'custom_design'
ENSEMBLE = 'ensemble'
# Only used as ensemble members
RIDGE_CV = 'ridge_cv'
KNN = 'knn'

KINDS = (MAIN_TERMS, INTERACTIONS_QUADRATIC, CUSTOM_DESIGN, ENSEMBLE, RIDGE_CV, KNN)
RIDGE_GRID = (0.01, 0.1, 1.0)
INTERCEPT = '1'


@dataclass(frozen=True)
class RegressionSpec:
    """Functional form of a nuisance regression.

    ``design`` lists basis expressions over covariate names and treatment
    indicators ``a_<label>`` for custom designs; the expression ``1`` is the
    intercept.
    """
    kind: str = MAIN_TERMS
    design: Tuple[str, ...] = ()
    ridge_penalty: float = 0.0
    ensemble_members: Tuple['RegressionSpec', ...] = ()
    ensemble_folds: int = settings.ENSEMBLE_FOLDS
    fold_seed: int = 0
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown regression kind {self.kind!r}", valid=list(KINDS))
        if self.ridge_penalty < 0:
            raise UsageError("ridge_penalty must be nonnegative")
        if self.kind == CUSTOM_DESIGN and not self.design:
            raise UsageError("custom_design needs at least one basis function")
        if self.kind == ENSEMBLE:
            if len(self.ensemble_members) < 2:
                raise UsageError("ensemble needs at least two members")
            if self.ensemble_folds < 2:
                raise UsageError("ensemble_folds must be at least 2")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def fingerprint(self) -> str:
        """Short stable hash of the specification"""
        text = repr((self.kind, self.design, self.ridge_penalty,
                     tuple(m.fingerprint() for m in self.ensemble_members),
                     self.ensemble_folds, self.fold_seed))
        return hashlib.sha1(text.encode()).hexdigest()[:12]

    def without_treatment(self) -> 'RegressionSpec':
        """Same form restricted to covariate-only terms"""
        if self.kind == CUSTOM_DESIGN:
            kept = tuple(term for term in self.design if not mentions_treatment(term))
            return replace(self, design=kept or (INTERCEPT,))
        if self.kind == ENSEMBLE:
            return replace(self, ensemble_members=tuple(m.without_treatment() for m in self.ensemble_members))
        return self

    # Constructors
    @classmethod
    def main_terms(cls, ridge_penalty: float = 0.0) -> 'RegressionSpec':
        return cls(MAIN_TERMS, ridge_penalty=ridge_penalty)

    @classmethod
    def interactions_quadratic(cls, ridge_penalty: float = 0.0) -> 'RegressionSpec':
        return cls(INTERACTIONS_QUADRATIC, ridge_penalty=ridge_penalty)

    @classmethod
    def custom(cls, design: Sequence[str], ridge_penalty: float = 0.0,
               label: Optional[str] = None) -> 'RegressionSpec':
        return cls(CUSTOM_DESIGN, design=tuple(design), ridge_penalty=ridge_penalty, label=label)

    @classmethod
    def intercept_only(cls) -> 'RegressionSpec':
        return cls(CUSTOM_DESIGN, design=(INTERCEPT,), label='intercept_only')

    @classmethod
    def ensemble(cls, members: Optional[Sequence['RegressionSpec']] = None,
                 folds: int = settings.ENSEMBLE_FOLDS, fold_seed: int = 0) -> 'RegressionSpec':
        if members is None:
            members = default_members()
        return cls(ENSEMBLE, ensemble_members=tuple(members), ensemble_folds=folds, fold_seed=fold_seed)


def default_members() -> Tuple[RegressionSpec, ...]:
    return (
        RegressionSpec(MAIN_TERMS),
        RegressionSpec(INTERACTIONS_QUADRATIC),
        RegressionSpec(RIDGE_CV),
        RegressionSpec(KNN),
    )


def read_design_file(path: Path) -> Tuple[str, ...]:
    """One basis expression per line; ``#`` starts a comment"""
    terms = []
    with open(path) as f:
        for line in f:
            term = line.split('#', 1)[0].strip()
            if term:
                terms.append(term)
    if not terms:
        raise UsageError(f"design file {path} holds no basis expressions")
    return tuple(terms)


def spec_from_token(token: str, ridge_penalty: float = 0.0, fold_seed: int = 0) -> RegressionSpec:
    """Parse a command-line regression token"""
    token = token.strip()
    if token == 'main-terms':
        return RegressionSpec.main_terms(ridge_penalty)
    if token == 'interactions-quadratic':
        return RegressionSpec.interactions_quadratic(ridge_penalty)
    if token == 'ensemble':
        return RegressionSpec.ensemble(fold_seed=fold_seed)
    if token.startswith('custom:'):
        path = Path(token[len('custom:'):])
        return RegressionSpec.custom(read_design_file(path), ridge_penalty, label=f"custom:{path.name}")
    raise UsageError(f"unknown regression spec {token!r}",
                     valid=['main-terms', 'interactions-quadratic', 'custom:<file>', 'ensemble'])


# Design matrices
_IDENTIFIER = re.compile(r'[^0-9A-Za-z_]')


def indicator_name(level: str) -> str:
    return 'a_' + _IDENTIFIER.sub('_', str(level))


def mentions_treatment(term: str) -> bool:
    return re.search(r'\ba_\w+', term) is not None


@dataclass(frozen=True)
class DesignBasis:
    """Evaluates one specification on covariates (and treatment codes).

    Treatment indicators use the first level as reference.
    """
    spec: RegressionSpec
    covariate_names: Tuple[str, ...]
    treatment_levels: Tuple[str, ...]
    use_treatment: bool = True

    def _indicators(self, a_codes: np.ndarray) -> np.ndarray:
        levels = len(self.treatment_levels)
        return (a_codes[:, None] == np.arange(1, levels)[None, :]).astype(float)

    def matrix(self, x: np.ndarray, a_codes: Optional[np.ndarray] = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        if self.use_treatment and a_codes is None:
            raise UsageError("treatment codes are required for this design")
        if self.spec.kind == CUSTOM_DESIGN:
            return self._custom(x, a_codes)

        blocks = [np.ones((n, 1)), x]
        if self.use_treatment:
            arms = self._indicators(np.asarray(a_codes))
            blocks.insert(1, arms)
        if self.spec.kind in (INTERACTIONS_QUADRATIC, RIDGE_CV):
            if self.use_treatment:
                arms = self._indicators(np.asarray(a_codes))
                blocks.append(np.einsum('nk,nj->nkj', arms, x).reshape(n, -1))
            blocks.append(x ** 2)
        return np.hstack(blocks)

    def _custom(self, x: np.ndarray, a_codes: Optional[np.ndarray]) -> np.ndarray:
        frame = pd.DataFrame(x, columns=list(self.covariate_names))
        if self.use_treatment:
            for k, level in enumerate(self.treatment_levels):
                frame[indicator_name(level)] = (np.asarray(a_codes) == k).astype(float)
        columns = []
        for term in self.spec.design:
            if not self.use_treatment and mentions_treatment(term):
                continue
            try:
                value = frame.eval(term, engine='python')
            except Exception as e:
                raise DesignError(f"cannot evaluate basis term ({e})", term)
            values = np.asarray(value, dtype=float)
            columns.append(np.broadcast_to(values, (x.shape[0],)) if values.ndim == 0 else values)
        if not columns:
            columns.append(np.ones(x.shape[0]))
        return np.column_stack(columns)

    def penalty_mask(self, width: int) -> np.ndarray:
        """1 for penalized columns; the intercept stays unpenalized"""
        mask = np.ones(width)
        if self.spec.kind != CUSTOM_DESIGN:
            mask[0] = 0.0
        else:
            kept = [t for t in self.spec.design if self.use_treatment or not mentions_treatment(t)]
            if not kept:
                mask[0] = 0.0
            for j, term in enumerate(kept):
                if term.strip() == INTERCEPT:
                    mask[j] = 0.0
        return mask
