"""Dialect/topic text-classification benchmark: string kernels, KRR, metrics, CLI."""

__version__ = "0.1.0"
