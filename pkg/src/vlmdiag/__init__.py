"""Perception/reasoning diagnostics for structured chain-of-thought post-training."""

__version__ = "0.1.0"
