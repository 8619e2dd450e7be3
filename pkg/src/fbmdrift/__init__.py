"""Simulation and drift estimation for SDEs driven by fractional Brownian motion."""

__version__ = "0.1.0"
