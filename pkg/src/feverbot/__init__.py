"""Simulation and control library for a temperature-screening mobile robot."""

__version__ = "0.1.0"
