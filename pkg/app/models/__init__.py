"""Simplex state space, diffusion model specs, presets, and hypothesis audits."""
