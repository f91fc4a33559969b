"""Minimal pulsating travelling-wave speeds for the periodic KPP equation."""

__version__ = "0.1.0"
