"""Quasi-stationary distribution estimators and the survival rate theta."""
