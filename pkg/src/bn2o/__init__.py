"""Approximate inference in BN2O noisy-OR networks with observation bias."""

__version__ = "0.1.0"
