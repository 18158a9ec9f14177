"""Federated bidirectional graph attention networks for cross-platform rumor detection."""

__version__ = "0.1.0"
