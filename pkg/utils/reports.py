"""CSV and JSON emission for experiment outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from core.constants import VERSION


class SchemaError(ValueError):
    """Raised when a row does not match its file's column schema."""


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def _atomic_write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(f"{path.suffix}.tmp")
    with tmp_path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    tmp_path.replace(path)
    return path


def render_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    expected = set(columns)
    for index, row in enumerate(rows):
        if set(row) != expected:
            missing = sorted(expected - set(row))
            extra = sorted(set(row) - expected)
            raise SchemaError(f"row {index}: missing {missing}, unexpected {extra}")
        writer.writerow([format_value(row[column]) for column in columns])
    return buffer.getvalue()


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Validate every row against `columns` and write the file atomically."""
    return _atomic_write_text(Path(path), render_csv(columns, rows))


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def git_blob_sha1(data: bytes | str) -> str:
    """Content hash in git's blob format: sha1(b"blob <len>\\0" + data)."""
    payload = data.encode("utf-8") if isinstance(data, str) else data
    header = f"blob {len(payload)}\0".encode("ascii")
    return hashlib.sha1(header + payload).hexdigest()


def write_meta(
    path: str | Path,
    config: dict[str, Any],
    canonical_config: str,
    host: dict[str, Any],
    started_at: str,
    finished_at: str,
    extra: dict[str, Any] | None = None,
) -> Path:
    payload = {
        "version": VERSION,
        "config": config,
        "config_hash": git_blob_sha1(canonical_config),
        "host": host,
        "started_at": started_at,
        "finished_at": finished_at,
    }
    if extra:
        payload.update(extra)
    return _atomic_write_text(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")
