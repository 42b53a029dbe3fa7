"""Behavioral simulator of a 56 Gb/s PAM-4 cryogenic optical link."""

__version__ = "0.1.0"
