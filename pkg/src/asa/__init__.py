"""Adversarial speaker adaptation of feed-forward acoustic models on synthetic data."""

__version__ = "0.1.0"
