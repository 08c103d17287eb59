"""Logging setup for crossdesign"""
from crossdesign.log.structured import configure_logging, StructuredLogger

__all__ = ['configure_logging', 'StructuredLogger']
