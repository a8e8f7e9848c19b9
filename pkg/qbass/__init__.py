"""Martingale transport with a reference measure: Bass constructions and their discrete solvers."""

__version__ = "0.1.0"
