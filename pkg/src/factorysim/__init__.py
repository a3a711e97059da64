"""Seeded simulator of distributed uplink scheduling on an indoor factory floor."""

__version__ = "0.1.0"
