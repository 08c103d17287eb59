"""Observed-data model, ingestion and validation"""
from crossdesign.core.sample import OBS, RCT, TargetSample, Unit, split_by_study
from crossdesign.core.io import SampleSchema, load_sample, write_sample
from crossdesign.core.validation import ValidationReport, Violation, validate_sample

__all__ = [
    'OBS', 'RCT', 'TargetSample', 'Unit', 'split_by_study',
    'SampleSchema', 'load_sample', 'write_sample',
    'ValidationReport', 'Violation', 'validate_sample',
]
