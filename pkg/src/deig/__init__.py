"""Decentralized online eigendecomposition over graphs."""

__version__ = "0.1.0"
