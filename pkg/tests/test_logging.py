from __future__ import annotations

import io

from ui.colors import C, ColorScheme, colors_supported
from utils.logging_utils import EnhancedLogger


def test_log_writes_context_to_file_and_stream(tmp_path):
    stream = io.StringIO()
    logger = EnhancedLogger(tmp_path / "logs" / "run.log", stream=stream)
    logger.log("SUCCESS", "cell done", seed=3, seconds=0.5)
    logger.close()
    text = (tmp_path / "logs" / "run.log").read_text(encoding="utf-8")
    assert "[ SUCCESS] cell done seed=3 seconds=0.5" in text
    assert "cell done" in stream.getvalue()


def test_quiet_keeps_warnings_on_the_terminal(tmp_path):
    stream = io.StringIO()
    logger = EnhancedLogger(tmp_path / "run.log", quiet=True, stream=stream)
    logger.log("INFO", "hidden")
    logger.log("WARNING", "shown")
    logger.close()
    assert "hidden" not in stream.getvalue()
    assert "shown" in stream.getvalue()
    assert "hidden" in (tmp_path / "run.log").read_text(encoding="utf-8")


def test_unknown_level_falls_back_to_info():
    stream = io.StringIO()
    EnhancedLogger(stream=stream).log("chatty", "message")
    assert "INFO" in stream.getvalue()


def test_oversized_log_is_rotated(tmp_path):
    path = tmp_path / "run.log"
    path.write_text("x" * 100, encoding="utf-8")
    logger = EnhancedLogger(path, max_size=10, stream=io.StringIO())
    logger.close()
    assert list(tmp_path.glob("run.log.*"))
    assert path.read_text(encoding="utf-8") == ""


def test_colors_respect_no_color(monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    assert not colors_supported(io.StringIO())
    scheme = ColorScheme()
    scheme.disable_colors()
    assert scheme.paint("ok", "GREEN") == "ok"
    assert C.paint("ok", "GREEN").endswith(C.RESET)
