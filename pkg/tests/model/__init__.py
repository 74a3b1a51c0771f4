"""Tests for the latent video model."""
