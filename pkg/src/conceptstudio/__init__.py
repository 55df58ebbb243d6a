"""Concept design studio: sketch-to-concept generation, decomposition, and editing."""

__version__ = "0.1.0"
