"""Simulation and analysis of an EIT quantum memory for sideband modulations of light."""

__version__ = "0.1.0"
