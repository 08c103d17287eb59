"""Structured logging configuration"""
import logging
import sys
from typing import Any, Dict

import structlog

PACKAGE_LOGGER = 'crossdesign'

_shared_processors = [
    structlog.stdlib.add_log_level,
    structlog.stdlib.add_logger_name,
    structlog.processors.TimeStamper(fmt="iso"),
]


def configure_logging(level: str = "INFO", fmt: str = "json") -> None:
    """Route package loggers through structlog.

    Library modules keep using ``logging.getLogger(__name__)``; their records
    and the ``StructuredLogger`` events share one renderer on stderr.
    """
    renderer = (structlog.processors.JSONRenderer(sort_keys=True) if fmt == "json"
                else structlog.dev.ConsoleRenderer(colors=False))

    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=_shared_processors,
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root = logging.getLogger(PACKAGE_LOGGER)
    root.handlers = [handler]
    root.setLevel(level.upper())
    root.propagate = False

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            *_shared_processors,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


class StructuredLogger:
    """Structured logging with context"""

    def __init__(self, name: str = f"{PACKAGE_LOGGER}.run"):
        self.logger = structlog.get_logger(name)
        self.context: Dict[str, Any] = {}

    def set_context(self, **kwargs):
        """Set context for all subsequent logs"""
        self.context.update(kwargs)

    def log(self, level: int, message: str, **kwargs):
        """Log with structured data"""
        self.logger.log(level, message, **{**self.context, **kwargs})
