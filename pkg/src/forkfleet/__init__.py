"""Headless electric forklift fleet simulator and trajectory analyses."""

__version__ = "0.1.0"
