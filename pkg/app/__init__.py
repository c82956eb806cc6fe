"""Spectral triple workbench: Dirac and FGR differential graded algebras."""

__version__ = "0.1.0"
