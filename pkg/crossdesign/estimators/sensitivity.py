"""Sensitivity analysis over a posited bias function b'(a, x) = beta_a . basis(x)"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from crossdesign.core.sample import OBS, TargetSample
from crossdesign.estimators.nuisances import NuisanceSet
from crossdesign.estimators.outcome import study_plug_in, weighted_mean
from crossdesign.exceptions import UsageError
from crossdesign.learners.specs import DesignBasis, RegressionSpec

logger = logging.getLogger(__name__)

Grid = Sequence[Sequence[float]]


@dataclass(frozen=True)
class SensitivitySpec:
    """Basis expressions over covariates and the coefficient vectors to scan.

    ``beta_grid`` is either one grid shared by every treatment or a mapping
    from treatment label to its own grid.
    """
    bias_basis: Tuple[str, ...] = ('1',)
    beta_grid: Union[Grid, Mapping[str, Grid]] = field(default_factory=lambda: ((0.0,),))

    def grid_for(self, a: str) -> np.ndarray:
        grid = self.beta_grid.get(str(a), ()) if isinstance(self.beta_grid, Mapping) else self.beta_grid
        values = np.atleast_2d(np.asarray(grid, dtype=float)) if len(grid) else np.empty((0, 0))
        if values.size == 0:
            raise UsageError(f"sensitivity grid for treatment {a} is empty")
        if values.shape[1] != len(self.bias_basis):
            raise UsageError(f"grid vectors have {values.shape[1]} entries, "
                             f"basis has {len(self.bias_basis)} functions")
        return values

    @classmethod
    def intercept_range(cls, low: float, high: float, points: int = 21) -> 'SensitivitySpec':
        return cls(('1',), tuple((float(v),) for v in np.linspace(low, high, points)))


@dataclass
class SensitivityResult:
    treatment: str
    lower: float
    upper: float
    curve: List[Tuple[Tuple[float, ...], float]]

    def as_rows(self) -> List[Dict[str, object]]:
        return [{'treatment': self.treatment, 'beta': ' '.join(f"{b:g}" for b in beta), 'estimate': value}
                for beta, value in self.curve]


def sensitivity_bounds(sample: TargetSample, nuisances: NuisanceSet, a: str,
                       spec: SensitivitySpec) -> SensitivityResult:
    """Scan beta over the grid; the bias b' acts on observational units through
    the share of them not receiving ``a``.

    b'(a, x) = E(Y^a | S=0, A=a, x) - E(Y^a | S=0, A!=a, x).
    """
    grid = spec.grid_for(a)
    basis = DesignBasis(RegressionSpec.custom(spec.bias_basis), sample.covariate_names,
                        sample.treatment_levels, use_treatment=False).matrix(sample.x)
    plug_in = study_plug_in(sample, nuisances, a)
    obs = (sample.s == OBS).astype(float)
    untreated_share = 1.0 - nuisances.pi_a_obs.predict(sample.x, a)

    curve = []
    for beta in grid:
        bias = basis @ beta
        value = weighted_mean(plug_in - obs * bias * untreated_share, sample.weight)
        curve.append((tuple(float(b) for b in beta), value))
    values = [v for _, v in curve]
    result = SensitivityResult(str(a), float(min(values)), float(max(values)), curve)
    logger.info(f"Sensitivity bounds for treatment {a}: [{result.lower:.4g}, {result.upper:.4g}] "
                f"over {len(curve)} grid points")
    return result
