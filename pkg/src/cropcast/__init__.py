"""Pixel-level staple-crop production forecasting toolkit."""

__version__ = "0.1.0"
