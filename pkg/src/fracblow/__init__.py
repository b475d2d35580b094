"""Blow-up certificates and simulations for time-fractional nonlinear wave equations."""

__version__ = "0.1.0"
