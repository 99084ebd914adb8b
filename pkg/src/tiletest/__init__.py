"""Tile test for back-testing distribution forecasts of market risk."""

__version__ = "0.1.0"
