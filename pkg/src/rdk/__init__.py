"""Closed-form depth-robustness toolkit: metrics, losses, augmentations and ensembling."""

__version__ = "0.1.0"
