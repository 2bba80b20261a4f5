"""Numerical laboratory for Musielak-Orlicz BMO-type seminorms on periodic grids."""

__version__ = "0.1.0"
