"""Enumerable model for checking identification exactly.

X takes three values: 0 (observational only), 1 (overlap) and 2 (randomized
only). U is binary with P(U | X) constant, randomized treatment ignores U and
observational treatment depends on U alone. The outcome mean is
m(a, x) + c(a, x) * U; when c does not vary with x the conditional bias is
constant and the identified functional equals E(Y^a).
"""
import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, Tuple

import numpy as np

from crossdesign.core.sample import OBS, RCT
from crossdesign.exceptions import UsageError

X_OBS_ONLY, X_OVERLAP, X_RCT_ONLY = 0, 1, 2
X_VALUES = (X_OBS_ONLY, X_OVERLAP, X_RCT_ONLY)
ARMS = (0, 1)


@dataclass(frozen=True)
class DiscreteModel:
    p_x: Tuple[float, float, float] = (0.5, 0.3, 0.2)
    p_s_overlap: float = 0.4
    p_u: float = 0.5
    p_a_rct: float = 0.6
    # P(A = 1 | S = 0, U = u) for u = 0, 1
    p_a_obs: Tuple[float, float] = (0.3, 0.7)
    m: Tuple[Tuple[float, float, float], Tuple[float, float, float]] = ((1.0, 2.5, 4.0), (0.5, 3.0, 2.0))
    c: Tuple[Tuple[float, float, float], Tuple[float, float, float]] = ((10.0, 10.0, 10.0), (6.0, 6.0, 6.0))
    name: str = field(default='constant_bias', compare=False)

    def __post_init__(self):
        if abs(sum(self.p_x) - 1.0) > 1e-12 or min(self.p_x) <= 0:
            raise UsageError("p_x must be a positive distribution over three values")
        for p in (self.p_s_overlap, self.p_u, self.p_a_rct, *self.p_a_obs):
            if not 0 < p < 1:
                raise UsageError(f"probabilities must lie in (0, 1), got {p}")

    @classmethod
    def violating(cls, shift: float = 8.0) -> 'DiscreteModel':
        """U effect larger outside the overlap, breaking constant bias"""
        base = cls()
        c = tuple((row[0] + shift, row[1], row[2]) for row in base.c)
        return replace(base, c=c, name='bias_violation')

    # Model pieces
    def p_s1(self, x: int) -> float:
        return {X_OBS_ONLY: 0.0, X_OVERLAP: self.p_s_overlap, X_RCT_ONLY: 1.0}[x]

    def p_a1(self, s: int, u: int) -> float:
        return self.p_a_rct if s == RCT else self.p_a_obs[u]

    def mean(self, a: int, x: int, u: int) -> float:
        return self.m[a][x] + self.c[a][x] * u

    def cells(self) -> Iterator[Tuple[int, int, int, int, float]]:
        """(x, u, s, a, probability) for every cell with positive mass"""
        for x, u, s, a in itertools.product(X_VALUES, (0, 1), (OBS, RCT), ARMS):
            p_s = self.p_s1(x) if s == RCT else 1.0 - self.p_s1(x)
            p_a = self.p_a1(s, u) if a == 1 else 1.0 - self.p_a1(s, u)
            p = self.p_x[x] * (self.p_u if u else 1.0 - self.p_u) * p_s * p_a
            if p > 0:
                yield x, u, s, a, p

    # Exact quantities
    def potential_outcome_mean(self, a: int) -> float:
        """E(Y^a) by enumerating X and U"""
        return float(sum(self.p_x[x] * (self.p_u if u else 1.0 - self.p_u) * self.mean(a, x, u)
                         for x in X_VALUES for u in (0, 1)))

    def conditional_mean(self, s: int, a: int, x: int) -> float:
        """E(Y | S=s, A=a, X=x)"""
        mass = total = 0.0
        for cx, u, cs, ca, p in self.cells():
            if (cx, cs, ca) == (x, s, a):
                mass += p
                total += p * self.mean(a, x, u)
        if mass == 0:
            raise UsageError(f"no mass at S={s}, A={a}, X={x}")
        return total / mass

    def study_probability(self, s: int, x: int) -> float:
        return self.p_s1(x) if s == RCT else 1.0 - self.p_s1(x)

    def identified_mean(self, a: int) -> float:
        """The cross-design functional evaluated with exact conditional means.

        Randomized units contribute E(Y | S=1, A=a, X); observational units
        contribute E(Y | S=0, A=a, X) minus the bias measured in the overlap.
        """
        bias = (self.conditional_mean(OBS, a, X_OVERLAP)
                - self.conditional_mean(RCT, a, X_OVERLAP))
        value = 0.0
        for x in X_VALUES:
            for s in (RCT, OBS):
                weight = self.p_x[x] * self.study_probability(s, x)
                if weight == 0:
                    continue
                if s == RCT:
                    value += weight * self.conditional_mean(RCT, a, x)
                else:
                    value += weight * (self.conditional_mean(OBS, a, x) - bias)
        return float(value)

    def check(self) -> Dict[int, Tuple[float, float]]:
        """(identified, truth) per arm"""
        return {a: (self.identified_mean(a), self.potential_outcome_mean(a)) for a in ARMS}

    def observational_bias(self, a: int) -> float:
        """E(Y | S=0, A=a) - E(Y^a | S=0)"""
        cells = list(self.cells())
        obs_arm = [(u, x, p) for x, u, s, ca, p in cells if s == OBS and ca == a]
        mass = sum(p for _, _, p in obs_arm)
        observed = sum(p * self.mean(a, x, u) for u, x, p in obs_arm) / mass
        obs = np.array([[self.p_x[x] * (1.0 - self.p_s1(x)) * (self.p_u if u else 1.0 - self.p_u)
                         for u in (0, 1)] for x in X_VALUES])
        truth = sum(obs[x, u] * self.mean(a, x, u) for x in X_VALUES for u in (0, 1)) / obs.sum()
        return float(observed - truth)
