"""Simulation and numerical analysis of absorbed diffusions on the simplex."""

__version__ = "0.1.0"
