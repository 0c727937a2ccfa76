"""Weighted-sum scalarisation toolkit for the bi-objective quadratic assignment problem."""

__version__ = "0.1.0"
