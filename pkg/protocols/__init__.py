"""Honest-but-curious two-party set protocols."""
