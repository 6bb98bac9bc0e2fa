"""
Logging setup.
structlog with a console renderer on stderr; stdout is left to command output.
"""
import logging
import sys

import structlog


def configure_logging(level: str = "WARNING") -> None:
    """
    Route structlog events at or above level to stderr.

    Args:
        level: Standard logging level name (DEBUG, INFO, WARNING, ERROR)
    """
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level {level!r}")
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="%H:%M:%S"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
