"""Structured logging for kppfront.

Solver and simulation events are emitted through structlog on stderr; the CLI
keeps stdout for its JSON and CSV results. ``ENVIRONMENT=development`` selects
the console renderer, anything else renders one JSON object per line.
"""

import logging
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
import structlog
from structlog.types import EventDict, Processor

from kppfront.config.settings import get_settings

settings = get_settings()

# Libraries that are chatty at DEBUG during plotting and sparse solves
QUIET_LOGGERS = ("matplotlib", "PIL")


def drop_color_message_key(_: Any, __: str, event_dict: EventDict) -> EventDict:
    event_dict.pop("color_message", None)
    return event_dict


def add_service_info(_: Any, __: str, event_dict: EventDict) -> EventDict:
    """Tag every event with the package name."""
    event_dict["service"] = "kppfront"
    return event_dict


def coerce_numpy(_: Any, __: str, event_dict: EventDict) -> EventDict:
    """Turn numpy scalars and small arrays into plain Python values.

    Eigenvalues, speeds and grids arrive as numpy types; the JSON renderer
    only accepts builtins. Arrays longer than 16 entries are summarized.
    """
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            if value.size <= 16:
                event_dict[key] = value.tolist()
            else:
                event_dict[key] = {
                    "shape": list(value.shape),
                    "min": float(np.min(value)),
                    "max": float(np.max(value)),
                }
    return event_dict


def configure_logging(level: Optional[str] = None) -> None:
    """Install the stderr (and optional file) handler and the structlog chain.

    Args:
        level: Overrides ``LOG_LEVEL`` when given (``--debug`` or ``DEBUG=true``).
    """
    log_level = getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO)

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        log_file = Path(settings.LOG_FILE)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(level=log_level, format="%(message)s", handlers=handlers, force=True)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(log_level, logging.WARNING))

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        drop_color_message_key,
        add_service_info,
        coerce_numpy,
    ]

    if settings.ENVIRONMENT == "development":
        processors.append(structlog.dev.ConsoleRenderer())
    else:
        processors.append(structlog.processors.JSONRenderer())

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    """Logger for ``name``, or the package logger."""
    return structlog.get_logger(name or "kppfront")


configure_logging()
