"""Sweep record store: engine, sessions and schema creation."""

from .models.base import create_db_engine, get_db, init_db

__all__ = ["create_db_engine", "get_db", "init_db"]
