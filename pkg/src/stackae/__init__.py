"""Stacked sparse autoencoders with classical baselines for tabular diagnosis data."""

__version__ = "0.1.0"
