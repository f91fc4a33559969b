"""Utility helpers (logging, metrics)."""
