"""
Process-wide logging setup.

Modules log through the stdlib (`logging.getLogger(__name__)`); this module
only decides how those records are rendered. structlog's ProcessorFormatter
turns each stdlib record into either a console key/value line or a JSON object
(LOG_FORMAT=json), so batch runs can be piped into log tooling unchanged.

Call configure_logging() once, from the CLI entrypoint.
"""

import logging
import sys

import structlog

_HANDLER: logging.StreamHandler | None = None


def configure_logging(level: str = "INFO", fmt: str = "console") -> None:
    """Install a single root handler. Repeated calls adjust the level and rebind the stream."""
    global _HANDLER

    root = logging.getLogger()
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    if _HANDLER is not None:
        _HANDLER.stream = sys.stderr
        return

    renderer = (
        structlog.processors.JSONRenderer()
        if fmt == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=[
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso"),
        ],
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )

    _HANDLER = logging.StreamHandler(sys.stderr)
    _HANDLER.setFormatter(formatter)
    root.handlers = [_HANDLER]

    # Third-party HTTP clients are chatty at INFO
    logging.getLogger("httpx").setLevel(logging.WARNING)
    logging.getLogger("anthropic").setLevel(logging.WARNING)
