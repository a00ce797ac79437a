"""Quantum reservoir computing with spin-network reservoirs."""

__version__ = "0.1.0"
