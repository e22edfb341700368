"""Repositories for map files and experiment outputs."""
