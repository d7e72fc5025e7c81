"""Soccer event detection from positional data."""

__version__ = "0.1.0"
