"""Predict GitHub and Stack Overflow activities from multi-platform activity interests."""

__version__ = "0.1.0"
