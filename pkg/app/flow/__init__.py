"""Deterministic mean flow x' = x∘F(x): integrators and attractor probes."""
