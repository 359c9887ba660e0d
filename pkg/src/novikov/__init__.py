"""Pseudospectral simulation and verification tools for the weakly
dissipative generalized two-component Novikov system."""

__version__ = "0.1.0"
