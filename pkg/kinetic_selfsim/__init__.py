"""Numerical toolkit probing self-similar blow-up for kinetic collision equations."""

__version__ = "0.1.0"
