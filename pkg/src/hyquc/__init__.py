"""Hybrid quantum-classical classifiers for row-type dependent tabular data."""

__version__ = "0.1.0"
