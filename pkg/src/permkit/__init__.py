"""Permutation-based approximate k-NN search in generic spaces."""

__version__ = "0.1.0"
