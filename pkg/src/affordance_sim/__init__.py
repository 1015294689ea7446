"""Desk-scale simulator of shared affordance-aware human-robot collaboration."""

__version__ = "0.1.0"
