"""Desk-scale UAV mission autonomy: BDI coordination, symbolic planning and SIL simulation."""

__version__ = "0.1.0"
