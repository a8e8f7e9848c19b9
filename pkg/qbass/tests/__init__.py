"""Tests for qbass."""
