"""Tests for the simplex-qsd toolkit."""
