"""Accelerated training and scoring of heterogeneous outlier detector pools."""

__version__ = "0.1.0"
