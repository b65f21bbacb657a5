"""ANSI palette for terminal output."""

from __future__ import annotations

import os
import sys


class ColorScheme:
    RESET = "\033[0m"
    BOLD = "\033[1m"
    DIM = "\033[2m"

    RED = "\033[91m"
    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    BLUE = "\033[94m"
    CYAN = "\033[96m"

    _CODES = ("RESET", "BOLD", "DIM", "RED", "GREEN", "YELLOW", "BLUE", "CYAN")

    def disable_colors(self) -> None:
        for name in self._CODES:
            setattr(self, name, "")

    def paint(self, text: str, color: str) -> str:
        return f"{getattr(self, color)}{text}{self.RESET}"


def colors_supported(stream=None) -> bool:
    """Honor NO_COLOR and skip escapes when output is not a terminal."""
    if os.environ.get("NO_COLOR"):
        return False
    stream = stream or sys.stdout
    return bool(getattr(stream, "isatty", lambda: False)())


C = ColorScheme()
