"""Numerical laboratory for quadrature surfaces and thickness functions."""

__version__ = "0.1.0"
