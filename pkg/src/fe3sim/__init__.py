"""Exact-diagonalization toolkit for the spin-5/2 Heisenberg triangle (Fe3 molecular magnet)."""

__version__ = "0.1.0"
