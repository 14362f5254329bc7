"""Exact finite certificates for sweeping-out constructions along sparse sequences."""

__version__ = "0.1.0"
