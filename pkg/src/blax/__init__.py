"""Numerical toolkit for Beurling-Lax representations in weighted Bergman spaces."""

__version__ = "0.1.0"
