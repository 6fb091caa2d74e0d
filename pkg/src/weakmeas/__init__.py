"""Simultaneous weak position-momentum measurement on 1D wavefunction grids."""

__version__ = "0.1.0"
