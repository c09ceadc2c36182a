"""Hermitian fractional Brownian motion: simulation, rough integration and exact moments."""

__version__ = "0.1.0"
