"""Tests for avsearch."""
