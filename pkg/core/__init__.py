"""Controlled data sharing for collaborative predictive blacklisting."""

__version__ = "1.0.0"
