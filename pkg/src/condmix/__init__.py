"""Conditional mixing experiments for Lozi and baker's maps."""

__version__ = "0.1.0"
