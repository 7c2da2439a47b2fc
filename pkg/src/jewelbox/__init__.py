"""Jewel polytopes, ideal-edge complexes and bordification maps for Outer space."""

__version__ = "0.1.0"
