"""Persisted sweep rows."""

from __future__ import annotations

from typing import Optional

from sqlalchemy import Float, Index, Integer, String, Text
from sqlalchemy.orm import Mapped, mapped_column

from .base import BaseModel


class SweepRecord(BaseModel):
    """One solved coefficient of a sweep (table ``sweep_record``)."""

    run_id: Mapped[str] = mapped_column(String(64), nullable=False)
    row_index: Mapped[int] = mapped_column(Integer, nullable=False)
    family: Mapped[str] = mapped_column(String(32), nullable=False)
    descriptor: Mapped[str] = mapped_column(Text, nullable=False)
    alpha: Mapped[float] = mapped_column(Float, nullable=False)
    period: Mapped[float] = mapped_column(Float, nullable=False)
    method: Mapped[str] = mapped_column(String(16), nullable=False)
    c_star: Mapped[Optional[float]] = mapped_column(Float)
    lambda_star: Mapped[Optional[float]] = mapped_column(Float)
    mu_zero: Mapped[Optional[float]] = mapped_column(Float)
    mu_star: Mapped[Optional[float]] = mapped_column(Float)
    gap_to_h: Mapped[Optional[float]] = mapped_column(Float)
    wall_time: Mapped[float] = mapped_column(Float, nullable=False, default=0.0)
    error: Mapped[Optional[str]] = mapped_column(Text)

    __table_args__ = (Index("ix_sweep_record_run_row", "run_id", "row_index", unique=True),)

    def __repr__(self) -> str:
        return f"<SweepRecord(run={self.run_id}, row={self.row_index}, c*={self.c_star})>"
