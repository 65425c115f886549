"""Stochastic day-ahead dispatch of microgrid resources on a radial feeder."""

__version__ = "0.1.0"
