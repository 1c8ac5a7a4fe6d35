"""
Logging setup.

Components log through structlog with short snake_case events; output goes to
stderr so JSON written to stdout stays parseable.
"""

import logging
import sys

import structlog

from errors import ConfigurationError

_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO, "warning": logging.WARNING, "error": logging.ERROR}


def configure_logging(level: str = "warning") -> None:
    """Route structlog to stderr at the given level."""
    numeric = _LEVELS.get(level.lower())
    if numeric is None:
        raise ConfigurationError(f"unknown log level {level!r}; expected one of {sorted(_LEVELS)}")

    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
