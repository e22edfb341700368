"""Utility helpers for log correlation."""
