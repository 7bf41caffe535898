"""Attention-based message passing over directed bonds, for molecular property prediction."""

__version__ = "0.1.0"
