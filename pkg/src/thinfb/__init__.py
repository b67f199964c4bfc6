"""Numerical laboratory for the vectorial thin one-phase free boundary problem."""

__version__ = "0.1.0"
