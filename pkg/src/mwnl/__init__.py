"""Imbalanced-data training toolkit: augmentation policy, weighted focal losses, schedules, metrics."""

__version__ = "0.1.0"
