"""Structural checks on target samples"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from crossdesign.core.sample import OBS, RCT, TargetSample

GROUP_NAMES = {RCT: 'randomized', OBS: 'observational'}


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    rows: Tuple[int, ...] = ()


@dataclass
class ValidationReport:
    """Findings from ``validate_sample``; warnings do not fail a sample"""
    violations: List[Violation] = field(default_factory=list)
    warnings: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def format(self) -> str:
        lines = [f"error [{v.code}] {v.message}" for v in self.violations]
        lines += [f"warning [{v.code}] {v.message}" for v in self.warnings]
        return "\n".join(lines)


def validate_sample(sample: TargetSample) -> ValidationReport:
    """Report structural problems that would break CCDS estimation"""
    report = ValidationReport()

    for group, name in GROUP_NAMES.items():
        if not np.any(sample.s == group):
            report.violations.append(Violation('EMPTY_GROUP', f"empty {name} group"))

    for group, name in GROUP_NAMES.items():
        in_group = sample.s == group
        if not np.any(in_group):
            continue
        present = set(sample.a[in_group].tolist())
        for level in sample.treatment_levels:
            if level not in present:
                report.violations.append(Violation(
                    'ABSENT_LEVEL', f"treatment {level} absent from {name} group"))

    finite_x = np.all(np.isfinite(sample.x), axis=1) if sample.d else np.ones(sample.n, bool)
    bad_rows = np.flatnonzero(~(np.isfinite(sample.y) & finite_x & np.isfinite(sample.weight)))
    if bad_rows.size:
        report.violations.append(Violation(
            'NON_FINITE', f"{bad_rows.size} rows hold non-finite values",
            tuple(int(r) for r in bad_rows)))

    if sample.n > 1:
        for j, name in enumerate(sample.covariate_names):
            column = sample.x[:, j]
            if np.all(column == column[0]):
                report.warnings.append(Violation('CONSTANT_COVARIATE', f"covariate {name} is constant"))

    return report
