"""Soft real-time simulator of a pumping kite power system."""

__version__ = "0.1.0"
