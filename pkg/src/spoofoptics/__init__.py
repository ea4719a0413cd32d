"""Lighting-physics laboratory for printed-photo presentation attacks."""

__version__ = "0.1.0"
