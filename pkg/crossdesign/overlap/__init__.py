"""Overlap-region estimation on the selection propensity"""
from crossdesign.overlap.region import (
    LOGIT, PROBABILITY, REFERENCE_GRID, CovariateBoundsRule, OverlapAssignment, OverlapDiagnostics,
    OverlapParams, assign_overlap, membership_from_scores, overlap_diagnostics, overlap_from_mask,
    standardized_mean_difference
)

__all__ = [
    'LOGIT', 'PROBABILITY', 'REFERENCE_GRID', 'CovariateBoundsRule', 'OverlapAssignment',
    'OverlapDiagnostics', 'OverlapParams', 'assign_overlap', 'membership_from_scores',
    'overlap_diagnostics', 'overlap_from_mask', 'standardized_mean_difference',
]
