"""Bootstrap and influence-function inference"""
from crossdesign.inference.bootstrap import bootstrap_ci, percentile_interval, resample_rows
from crossdesign.inference.influence import EifResult, eif_inference, eif_values
from crossdesign.inference.results import (
    BOOTSTRAP_PERCENTILE, EIF_PLUGIN, POINT_ONLY, RESULT_COLUMNS, InferenceResult, Interval,
    adjusted_level, estimand_label, results_frame, write_results
)

__all__ = [
    'bootstrap_ci', 'percentile_interval', 'resample_rows',
    'EifResult', 'eif_inference', 'eif_values',
    'BOOTSTRAP_PERCENTILE', 'EIF_PLUGIN', 'POINT_ONLY', 'RESULT_COLUMNS', 'InferenceResult',
    'Interval', 'adjusted_level', 'estimand_label', 'results_frame', 'write_results',
]
