"""Conditional cross-design synthesis estimators and their simulation harness"""
__version__ = '0.1.0'
