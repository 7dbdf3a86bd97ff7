"""Defect concentration laboratory for semilinear wave equations."""

__version__ = "0.1.0"
