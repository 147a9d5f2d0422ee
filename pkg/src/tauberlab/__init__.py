"""Numerical laboratory for discounted versus long-run average values in deterministic control."""

__version__ = "0.1.0"
