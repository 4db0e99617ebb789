"""Sequence configuration, runs, sweeps and outputs."""
