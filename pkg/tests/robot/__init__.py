"""Tests for URDF parsing and kinematics."""
