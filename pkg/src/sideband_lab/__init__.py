"""Numerical laboratory for sideband asymmetry in linearly coupled cavity-mechanical systems."""

__version__ = "0.1.0"
