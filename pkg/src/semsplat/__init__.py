"""Semantic Gaussian-splatting mapping engine."""

__version__ = "1.0.0"
