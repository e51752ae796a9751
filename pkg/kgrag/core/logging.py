# kgrag/core/logging.py
import logging
import sys

import structlog


def configure_logging(level: int = logging.WARNING) -> None:
    """Send structlog events to stderr so stdout stays a clean JSON/context channel."""
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.format_exc_info,
            structlog.processors.KeyValueRenderer(key_order=["level", "event"], sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
