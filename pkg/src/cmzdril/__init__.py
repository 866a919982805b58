"""Ensemble-disagreement imitation learning (CMZ-DRIL) with BC and DRIL baselines."""

__version__ = "0.1.0"
