"""Logging setup: stdlib loggers rendered through rich."""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

_CONFIGURED = False


def configure_logging(level: int = logging.INFO, console: Optional[Console] = None) -> None:
    """Install a single RichHandler on the package logger.

    Args:
        level: Logging level for the ``frontdoor_mta`` logger tree
        console: Rich console to render into (stderr by default)
    """
    global _CONFIGURED

    logger = logging.getLogger("frontdoor_mta")
    logger.setLevel(level)

    if _CONFIGURED:
        for handler in logger.handlers:
            handler.setLevel(level)
        return

    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=True,
        markup=False,
    )
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    _CONFIGURED = True


def kv(**fields) -> str:
    """Format fields as a machine-parseable ``key=value`` line."""
    parts = []
    for key, value in fields.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.6g}")
        else:
            parts.append(f"{key}={value}")
    return " ".join(parts)
