"""Steady-state analysis and flow-level simulation of interference-coupled RAN slices."""

from ._slicewave import complexity, scenario_hash, simulate, solve

__all__ = ["solve", "simulate", "complexity", "scenario_hash"]
