"""Base database model and session management with SQLAlchemy 2.0+."""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Any, Generator, Optional

from sqlalchemy import DateTime, Engine, Integer, create_engine, inspect
from sqlalchemy.orm import (
    DeclarativeBase,
    Mapped,
    Session,
    declared_attr,
    mapped_column,
    sessionmaker,
)
from sqlalchemy.pool import StaticPool

from kppfront.config.settings import get_settings
from kppfront.utils.logging import get_logger

logger = get_logger(__name__)
settings = get_settings()


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def create_db_engine(url: Optional[str] = None) -> Engine:
    """Create and configure the SQLAlchemy engine.

    Args:
        url: Database URL; ``DATABASE_URL`` from the settings when omitted.
    """
    url = url or settings.DATABASE_URL
    connect_args = {}
    if url.startswith("sqlite"):
        connect_args["check_same_thread"] = False

    return create_engine(
        url,
        connect_args=connect_args,
        poolclass=StaticPool if url.startswith("sqlite") else None,
        echo=settings.SQL_ECHO,
    )


_engine: Optional[Engine] = None


def get_engine() -> Engine:
    """The process-wide engine, created on first use."""
    global _engine
    if _engine is None:
        _engine = create_db_engine()
    return _engine


def session_factory(engine: Optional[Engine] = None) -> sessionmaker[Session]:
    """Session factory bound to ``engine`` (the default engine when omitted)."""
    return sessionmaker(bind=engine or get_engine(), expire_on_commit=False)


def get_db(engine: Optional[Engine] = None) -> Generator[Session, None, None]:
    """Yield a session that is rolled back on error and always closed."""
    db = session_factory(engine)()
    try:
        yield db
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()


class BaseModel(DeclarativeBase):
    """Base model with id and timestamps; table names are snake_case class names."""

    __abstract__ = True

    id: Mapped[int] = mapped_column(Integer, primary_key=True, index=True)
    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=_utcnow, nullable=False
    )
    updated_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=_utcnow, onupdate=_utcnow, nullable=False
    )

    @declared_attr.directive
    def __tablename__(cls) -> str:  # pylint: disable=no-self-argument
        """Convert the CamelCase class name to a snake_case table name."""
        return "".join(
            ["_" + c.lower() if c.isupper() else c for c in cls.__name__]
        ).lstrip("_")

    def to_dict(self) -> dict[str, Any]:
        """Column name to value mapping."""
        return {column.name: getattr(self, column.name) for column in self.__table__.columns}

    @classmethod
    def get_columns(cls) -> list[str]:
        """All column names of the model."""
        return [column.name for column in inspect(cls).columns]


def init_db(engine: Optional[Engine] = None) -> None:
    """Create all tables on ``engine``."""
    from kppfront import models  # noqa: F401  # pylint: disable=import-outside-toplevel

    logger.info("Initializing database", tables=sorted(BaseModel.metadata.tables))
    BaseModel.metadata.create_all(bind=engine or get_engine())
    logger.info("Database initialization complete")
