"""Content-based wake-up radio monitoring simulator."""

__version__ = "0.1.0"
