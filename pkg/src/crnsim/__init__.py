"""Cognitive radio network simulator with queue-aware opportunistic routing."""

__version__ = "0.1.0"
