"""Batch ridesharing simulator with a biogeography-based matcher and baselines."""

__version__ = "0.1.0"
