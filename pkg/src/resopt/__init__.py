"""Reservoir release-priority simulation and RBF policy search."""

__version__ = "0.1.0"
