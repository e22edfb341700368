"""avsearch - embodied audiovisual search simulation."""

__version__ = "0.1.0"
