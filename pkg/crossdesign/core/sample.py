"""Observed-data model for a target sample of randomized and observational units"""
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from crossdesign.exceptions import SchemaError

RCT = 1
OBS = 0


@dataclass(frozen=True)
class Unit:
    """One observed unit O = (Y, A, X, S) with its sampling weight"""
    y: float
    a: str
    s: int
    x: Tuple[float, ...]
    weight: float = 1.0


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


class TargetSample:
    """Immutable column store of units.

    Treatment labels are opaque strings; ``a_codes`` re-indexes them densely
    in ``treatment_levels`` order. ``index`` keeps each unit's position in the
    sample it was taken from so subsets can be re-assembled.
    """

    def __init__(self,
                 y: Sequence[float],
                 a: Sequence[str],
                 s: Sequence[int],
                 x: Union[np.ndarray, Sequence[Sequence[float]]],
                 weight: Optional[Sequence[float]] = None,
                 covariate_names: Optional[Sequence[str]] = None,
                 treatment_levels: Optional[Sequence[str]] = None,
                 index: Optional[Sequence[int]] = None):
        y = np.asarray(y, dtype=float).reshape(-1)
        n = y.shape[0]
        a = np.asarray([str(v) for v in a], dtype=object)
        s_raw = np.asarray(s)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1) if n else x.reshape(0, 1)

        if a.shape[0] != n or s_raw.shape[0] != n or x.shape[0] != n:
            raise SchemaError("columns y, a, s and covariates differ in length")
        bad = np.flatnonzero(~np.isin(s_raw, (0, 1)))
        if bad.size:
            raise SchemaError(f"study indicator must be 0 or 1, got {s_raw[bad[0]]!r}",
                              column='s', row=int(bad[0]))
        s = s_raw.astype(int)

        weight = np.ones(n) if weight is None else np.asarray(weight, dtype=float).reshape(-1)
        if weight.shape[0] != n:
            raise SchemaError("weight column differs in length", column='w')
        negative = np.flatnonzero(~(weight >= 0))
        if negative.size:
            raise SchemaError("sampling weights must be nonnegative", column='w',
                              row=int(negative[0]))

        if covariate_names is None:
            covariate_names = [f"x{j + 1}" for j in range(x.shape[1])]
        covariate_names = tuple(str(c) for c in covariate_names)
        if len(covariate_names) != x.shape[1]:
            raise SchemaError("covariate names do not match covariate columns")

        if treatment_levels is None:
            treatment_levels = tuple(dict.fromkeys(a.tolist()))
        treatment_levels = tuple(str(t) for t in treatment_levels)
        lookup = {level: k for k, level in enumerate(treatment_levels)}
        unknown = [v for v in dict.fromkeys(a.tolist()) if v not in lookup]
        if unknown:
            raise SchemaError(f"treatment {unknown[0]!r} is not a declared level", column='a')

        self.y = _frozen(y)
        self.a = _frozen(a)
        self.s = _frozen(s)
        self.x = _frozen(np.ascontiguousarray(x))
        self.weight = _frozen(weight)
        self.covariate_names = covariate_names
        self.treatment_levels = treatment_levels
        self.a_codes = _frozen(np.fromiter((lookup[v] for v in a), dtype=int, count=n))
        self.index = _frozen(np.arange(n) if index is None else np.asarray(index, dtype=int))

    # Sizes
    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_rct(self) -> int:
        return int(np.sum(self.s == RCT))

    @property
    def n_obs(self) -> int:
        return int(np.sum(self.s == OBS))

    def __len__(self) -> int:
        return self.n

    @property
    def units(self) -> List[Unit]:
        return list(iter(self))

    def __iter__(self) -> Iterator[Unit]:
        for i in range(self.n):
            yield Unit(float(self.y[i]), str(self.a[i]), int(self.s[i]),
                       tuple(float(v) for v in self.x[i]), float(self.weight[i]))

    def covariate(self, name: str) -> np.ndarray:
        return self.x[:, self.covariate_names.index(name)]

    def level_code(self, level: str) -> int:
        try:
            return self.treatment_levels.index(str(level))
        except ValueError:
            raise SchemaError(f"unknown treatment level {level!r}", column='a')

    def weighted_fraction(self, mask: np.ndarray) -> float:
        """Share of total sampling weight carried by ``mask``"""
        total = self.weight.sum()
        return float(self.weight[mask].sum() / total) if total > 0 else 0.0

    # Derived samples
    def _rebuild(self, rows: np.ndarray, y=None, weight=None, index=None) -> 'TargetSample':
        return TargetSample(
            self.y[rows] if y is None else y,
            self.a[rows],
            self.s[rows],
            self.x[rows],
            self.weight[rows] if weight is None else weight,
            covariate_names=self.covariate_names,
            treatment_levels=self.treatment_levels,
            index=self.index[rows] if index is None else index,
        )

    def subset(self, mask: np.ndarray) -> 'TargetSample':
        """Rows selected by a boolean mask or an integer index array, order kept"""
        mask = np.asarray(mask)
        rows = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(int)
        return self._rebuild(rows)

    def resample(self, rows: np.ndarray) -> 'TargetSample':
        """Rows drawn with repetition; positions are re-indexed from zero"""
        rows = np.asarray(rows, dtype=int)
        return self._rebuild(rows, index=np.arange(rows.shape[0]))

    def with_outcome(self, y: Sequence[float]) -> 'TargetSample':
        return self._rebuild(np.arange(self.n), y=np.asarray(y, dtype=float))

    def with_weight(self, weight: Sequence[float]) -> 'TargetSample':
        return self._rebuild(np.arange(self.n), weight=np.asarray(weight, dtype=float))

    def __repr__(self) -> str:
        return (f"TargetSample(n={self.n}, n_rct={self.n_rct}, n_obs={self.n_obs}, "
                f"d={self.d}, treatments={list(self.treatment_levels)})")


def split_by_study(sample: TargetSample) -> Tuple[TargetSample, TargetSample]:
    """Partition into (randomized, observational) subsets keeping original indices"""
    return sample.subset(sample.s == RCT), sample.subset(sample.s == OBS)
