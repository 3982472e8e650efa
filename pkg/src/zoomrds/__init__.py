"""Numerical toolkit for random skew products: contraction-time detection,
topological pressure, and equilibrium-state approximation."""

__version__ = "0.1.0"
