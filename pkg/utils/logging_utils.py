"""Leveled run logging to the terminal and an optional run log file."""

from __future__ import annotations

import logging
import os
import sys
import time
from datetime import datetime
from pathlib import Path

from ui.colors import C

LOGGER_NAME = "EXPLAB"
DEFAULT_MAX_SIZE = 5 * 1024 * 1024
DEFAULT_RETENTION_DAYS = 14

# SUCCESS sits between INFO and WARNING on the stdlib scale.
SUCCESS = 25
logging.addLevelName(SUCCESS, "SUCCESS")

_COLORS = {
    "DEBUG": "DIM",
    "INFO": "BLUE",
    "SUCCESS": "GREEN",
    "WARNING": "YELLOW",
    "ERROR": "RED",
    "CRITICAL": "RED",
}


def _format_context(context: dict[str, object]) -> str:
    return " ".join(f"{key}={value}" for key, value in context.items())


class EnhancedLogger:
    """Write `level message key=value ...` lines to stdout and to a log file.

    `quiet` silences the terminal below WARNING; the file always gets DEBUG
    and above.
    """

    def __init__(
        self,
        log_file: str | os.PathLike[str] | None = None,
        quiet: bool = False,
        max_size: int = DEFAULT_MAX_SIZE,
        retention_days: int = DEFAULT_RETENTION_DAYS,
        stream=None,
    ):
        self.log_file = Path(log_file) if log_file is not None else None
        self.quiet = quiet
        self.max_size = max_size
        self.retention_days = retention_days
        self.stream = stream
        self._setup_logging()

    def _setup_logging(self) -> None:
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()
        self.logger.propagate = False
        if self.log_file is None:
            return
        self.log_file.parent.mkdir(parents=True, exist_ok=True)
        self._rotate_log_if_needed()
        handler = logging.FileHandler(self.log_file, encoding="utf-8")
        handler.setFormatter(
            logging.Formatter(
                fmt="%(asctime)s [%(levelname)8s] %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            )
        )
        self.logger.addHandler(handler)

    def _rotate_log_if_needed(self) -> None:
        if not self.log_file.exists() or self.log_file.stat().st_size <= self.max_size:
            return
        self.log_file.replace(
            self.log_file.with_suffix(f"{self.log_file.suffix}.{int(time.time())}")
        )
        cutoff = time.time() - self.retention_days * 24 * 60 * 60
        for old in self.log_file.parent.glob(f"{self.log_file.name}.*"):
            if old.stat().st_ctime < cutoff:
                old.unlink(missing_ok=True)

    def close(self) -> None:
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

    def log(self, level: str, message: str, **context: object) -> None:
        name = level.upper()
        numeric = logging.getLevelName(name)
        if not isinstance(numeric, int):
            name, numeric = "INFO", logging.INFO
        payload = f"{message} {_format_context(context)}" if context else message
        self.logger.log(numeric, payload)
        if self.quiet and numeric < logging.WARNING:
            return
        color = getattr(C, _COLORS.get(name, "RESET"))
        suffix = f" {C.DIM}{_format_context(context)}{C.RESET}" if context else ""
        timestamp = datetime.now().strftime("%H:%M:%S")
        print(
            f"{C.DIM}[{timestamp}]{C.RESET} {color}[{name:>8s}]{C.RESET} {message}{suffix}",
            file=self.stream or sys.stdout,
        )
