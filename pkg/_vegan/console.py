from __future__ import annotations

import functools
import logging
import os
import sys
from typing import TextIO

from . import config as config
from .highlight import highlight_level

PACKAGE_LOGGER = "_vegan"


class ConsoleHandler(logging.StreamHandler):
    """Writes `[level] message` lines, coloring the prefix on capable terminals."""

    def __init__(self, stream: TextIO | None = None) -> None:
        super().__init__(sys.stderr if stream is None else stream)
        self.setFormatter(logging.Formatter("%(message)s"))

    def _candidate_streams(self) -> list[TextIO]:
        streams = [self.stream]
        # pytest captures the standard streams; the originals still reach the terminal.
        if "PYTEST_VERSION" in os.environ:
            originals = {id(sys.stdout): sys.__stdout__, id(sys.stderr): sys.__stderr__}
            original = originals.get(id(self.stream))
            if original is not None:
                streams.append(original)
        return streams

    @functools.cached_property
    def supports_color(self) -> bool:
        """True when the stream is an ANSI-capable terminal and NO_COLOR is unset."""
        if "NO_COLOR" in os.environ:
            return False
        if sys.platform == "win32" and "ANSICON" not in os.environ:
            return False
        return any(
            callable(getattr(stream, "isatty", None)) and stream.isatty()
            for stream in self._candidate_streams()
        )

    @property
    def use_color(self) -> bool:
        color = config.CONFIG.color
        if color == "auto":
            return self.supports_color
        return color

    def format(self, record: logging.LogRecord) -> str:
        prefix = f"[{record.levelname.lower()}]"
        if self.use_color:
            prefix = highlight_level(prefix, config.CONFIG.style, record.levelno)
        return f"{prefix} {super().format(record)}"


def setup_logging(
    *, quiet: bool = False, verbose: bool = False, stream: TextIO | None = None
) -> ConsoleHandler:
    """Install a single console handler on the package logger."""
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        if isinstance(handler, ConsoleHandler):
            logger.removeHandler(handler)
    handler = ConsoleHandler(stream)
    logger.addHandler(handler)
    if quiet:
        logger.setLevel(logging.WARNING)
    elif verbose:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)
    return handler
