"""
Logging configuration for the periodic drift estimator.

This module sets up structured logging using structlog.
"""

import logging
import sys
from typing import Any, Optional

import structlog
from structlog.typing import FilteringBoundLogger

from app.core.config import Settings, get_settings


def configure_logging(settings: Optional[Settings] = None) -> FilteringBoundLogger:
    """Configure structured logging with structlog."""
    settings = settings or get_settings()
    level = getattr(logging, settings.log_level.upper(), logging.INFO)

    # Configure standard library logging
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=level,
    )

    # Configure structlog; records go to stderr so stdout stays free for data
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer()
            if settings.log_format.lower() == "json"
            else structlog.dev.ConsoleRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )

    return structlog.get_logger()


def get_logger(name: Optional[str] = None) -> FilteringBoundLogger:
    """Get a logger instance with optional name."""
    if name:
        return structlog.get_logger(name)
    return structlog.get_logger()


def bind_run_context(**context: Any) -> None:
    """Bind run-wide context (seed, config hash, mode) to every log record."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(**context)
