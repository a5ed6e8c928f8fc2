"""Adaptive stratified Monte Carlo integration."""

__version__ = "0.1.0"
