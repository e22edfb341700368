"""CLI commands for avsearch."""
