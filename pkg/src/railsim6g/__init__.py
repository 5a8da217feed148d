"""Deterministic link-level simulation toolkit for 6G smart-railway subsystems."""

__version__ = "0.1.0"
