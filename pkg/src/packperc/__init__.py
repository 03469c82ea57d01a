"""Percolation on geometric packings: simulation, constructions, and proof-constant certificates."""

__version__ = "0.1.0"
