"""Tests for cross-cutting utilities."""
