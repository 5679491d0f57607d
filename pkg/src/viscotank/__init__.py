"""Feedback stabilization of a tank carrying a viscous liquid: simulation and certificates."""
__version__ = "0.1.0"
