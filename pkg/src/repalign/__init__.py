"""Representational alignment metrics for sets of embeddings."""

__version__ = "0.1.0"
