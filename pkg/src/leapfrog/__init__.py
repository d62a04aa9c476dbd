"""Resonance-constrained fermion dynamics on a one-dimensional lattice."""

__version__ = "0.1.0"
