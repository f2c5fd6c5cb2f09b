"""Closed-loop simulation and planning for a rider on two self-balancing platforms."""

__version__ = "0.1.0"
