"""Stochastic simulation of the absorbed diffusion and its diagnostics."""
