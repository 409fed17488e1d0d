"""Tests for sparsenet."""
