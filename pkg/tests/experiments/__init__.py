"""Scaled acceptance experiments."""
