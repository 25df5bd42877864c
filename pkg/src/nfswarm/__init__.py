"""Decentralized navigation-function control for connected multi-agent teams."""

__version__ = "0.1.0"
