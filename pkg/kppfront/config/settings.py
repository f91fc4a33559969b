"""Application settings and configuration.

This module provides a centralized way to manage application settings
using environment variables with sensible defaults.
"""

from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(
        case_sensitive=True,
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Application
    DEBUG: bool = Field(False)
    ENVIRONMENT: str = Field("production")
    LOG_LEVEL: str = Field("INFO")
    LOG_FILE: str = Field("", description="Log file path; empty disables file logging")
    OUTPUT_DIR: str = Field(
        "kppfront_output", description="Default directory for CSV/SVG/JSON output"
    )

    # Sweep record store
    DATABASE_URL: str = Field(
        "sqlite:///./kppfront_sweeps.db",
        description="Database connection URL for sweep records. Defaults to SQLite.",
    )
    SQL_ECHO: bool = Field(False)

    # Eigensolver defaults
    GRID_N: int = Field(2048, description="Grid points per period for the FD solver")
    TOLERANCE: float = Field(1e-10, description="Scaled residual tolerance")
    MAX_ITERATIONS: int = Field(10000, description="Iteration budget per eigensolve")

    # Speed minimization
    SCAN_POINTS: int = Field(48, description="Geometric lambda scan size")
    LAMBDA_TOL: float = Field(1e-6, description="Golden-section bracket width")

    # Batch work
    WORKERS: int = Field(1, description="Worker threads for scans and sweeps (1 = sequential)")

    # Monitoring
    METRICS_ENABLED: bool = Field(True)

    @field_validator("GRID_N")
    @classmethod
    def check_grid(cls, v: int) -> int:
        """The FD grid needs at least 64 points per period."""
        if v < 64:
            raise ValueError("GRID_N must be >= 64")
        return v

    @field_validator("WORKERS")
    @classmethod
    def check_workers(cls, v: int) -> int:
        """At least one worker."""
        return max(1, v)


# Create settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get the settings instance.

    Returns:
        Settings: The settings instance.
    """
    return settings


def ensure_dirs() -> None:
    """Ensure the log directory exists."""
    if settings.LOG_FILE:
        Path(settings.LOG_FILE).parent.mkdir(parents=True, exist_ok=True)


# Ensure directories exist when module is imported
ensure_dirs()
