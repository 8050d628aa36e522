"""Batch figure regeneration from granufrac file artifacts.

This package deliberately does not import granufrac: it consumes only the
published columnar file formats, so the two tools can evolve separately.
"""

__all__ = ["formats", "figures", "cli"]
