"""Simulation toolkit for closed timelike curve models and nonlinear boxes."""

__version__ = "0.1.0"
