"""Tests for cameras, rasterization and frame formats."""
