"""Unit test package for stabilipy."""
