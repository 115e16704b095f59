"""Spinbin test suite."""
