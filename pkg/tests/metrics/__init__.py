"""Tests for metrics and reports."""
