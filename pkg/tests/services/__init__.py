"""Tests for the simulation services."""
