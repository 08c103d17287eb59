"""Inference results and their CSV form"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List

import pandas as pd

from crossdesign.exceptions import UsageError

logger = logging.getLogger(__name__)

BOOTSTRAP_PERCENTILE = 'bootstrap_percentile'
EIF_PLUGIN = 'eif_plugin'
POINT_ONLY = 'point'

RESULT_COLUMNS = ['estimator', 'treatment', 'estimate', 'se', 'ci_lo', 'ci_hi', 'method', 'B', 'level', 'k']


def adjusted_level(level: float, multiplicity_k: int = 1) -> float:
    """Marginal level 1 - (1 - level) / k"""
    if not 0 < level < 1:
        raise UsageError(f"level must lie in (0, 1), got {level}")
    if multiplicity_k < 1:
        raise UsageError(f"multiplicity k must be at least 1, got {multiplicity_k}")
    return 1.0 - (1.0 - level) / multiplicity_k


def estimand_label(estimand: str) -> str:
    """``ptsm[1]`` -> ``1``; ``pate[1-2]`` -> ``1-2``"""
    if '[' in estimand and estimand.endswith(']'):
        return estimand[estimand.index('[') + 1:-1]
    return estimand


@dataclass
class Interval:
    estimate: float
    se: float
    ci_lo: float
    ci_hi: float

    def contains(self, value: float) -> bool:
        return self.ci_lo <= value <= self.ci_hi

    @property
    def width(self) -> float:
        return self.ci_hi - self.ci_lo


@dataclass
class InferenceResult:
    """Point values, standard errors and intervals for one estimator"""
    estimator: str
    method: str
    level: float = 0.95
    multiplicity_k: int = 1
    replications: int = 0
    intervals: Dict[str, Interval] = field(default_factory=dict)
    replicates: Dict[str, List[float]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        adjusted_level(self.level, self.multiplicity_k)

    @property
    def marginal_level(self) -> float:
        return adjusted_level(self.level, self.multiplicity_k)

    def rows(self) -> List[Dict[str, object]]:
        return [{
            'estimator': self.estimator,
            'treatment': estimand_label(estimand),
            'estimate': iv.estimate,
            'se': iv.se,
            'ci_lo': iv.ci_lo,
            'ci_hi': iv.ci_hi,
            'method': self.method,
            'B': self.replications,
            'level': self.level,
            'k': self.multiplicity_k,
        } for estimand, iv in self.intervals.items()]


def results_frame(results: Iterable[InferenceResult]) -> pd.DataFrame:
    rows = [row for result in results for row in result.rows()]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def write_results(results: Iterable[InferenceResult], path: Path) -> Path:
    """Write the results CSV; floats at full precision so reruns compare byte for byte"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(results).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    logger.info(f"Wrote estimates to {path}")
    return path
