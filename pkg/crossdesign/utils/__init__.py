"""Shared helpers"""
from crossdesign.utils.rng import make_generator
from crossdesign.utils.retry import RetryConfig, with_redraw

__all__ = ['make_generator', 'RetryConfig', 'with_redraw']
