"""Database models for sweep results."""

from .sweep_record import SweepRecord

__all__ = ["SweepRecord"]
