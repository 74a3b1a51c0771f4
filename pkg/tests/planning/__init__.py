"""Tests for CEM planning, MPC and policy evaluation."""
