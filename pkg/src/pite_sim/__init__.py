"""Simulator and analysis toolkit for probabilistic imaginary-time evolution."""

__version__ = "0.1.0"
