"""SQLite run registry: runs, per-cell results and errors."""

from __future__ import annotations

import sqlite3
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator

RUN_STATUSES = ("running", "finished", "failed", "interrupted")


class DatabaseManager:
    """Thread-friendly registry with WAL enabled.

    Connections are opened per call so cell callbacks from worker threads can
    write concurrently with the main thread.
    """

    def __init__(self, db_path: str | Path):
        self.db_path = Path(db_path)
        self._init_database()

    def _create_connection(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path, timeout=30, check_same_thread=False)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA journal_mode=WAL;")
        conn.execute("PRAGMA synchronous=NORMAL;")
        conn.execute("PRAGMA foreign_keys=ON;")
        conn.execute("PRAGMA busy_timeout=30000;")
        return conn

    def _init_database(self) -> None:
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        with self.get_connection() as conn:
            conn.executescript("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    experiment TEXT NOT NULL,
                    config_hash TEXT NOT NULL,
                    output_dir TEXT NOT NULL,
                    start_time TIMESTAMP NOT NULL,
                    end_time TIMESTAMP,
                    duration REAL,
                    status TEXT NOT NULL DEFAULT 'running',
                    cells INTEGER DEFAULT 0,
                    failed_cells INTEGER DEFAULT 0
                );
                CREATE TABLE IF NOT EXISTS cell_results (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL REFERENCES runs(id) ON DELETE CASCADE,
                    algorithm TEXT NOT NULL,
                    cell_group TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    duration REAL NOT NULL,
                    status TEXT NOT NULL,
                    final_metric REAL
                );
                CREATE TABLE IF NOT EXISTS error_log (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER REFERENCES runs(id) ON DELETE SET NULL,
                    error_type TEXT NOT NULL,
                    error_message TEXT NOT NULL,
                    stack_trace TEXT,
                    timestamp TIMESTAMP NOT NULL,
                    severity TEXT DEFAULT 'ERROR'
                );
                CREATE INDEX IF NOT EXISTS idx_runs_experiment
                    ON runs(experiment);
                CREATE INDEX IF NOT EXISTS idx_cells_run
                    ON cell_results(run_id);
                CREATE INDEX IF NOT EXISTS idx_errors_time
                    ON error_log(timestamp);
                """)

    @contextmanager
    def get_connection(self) -> Iterator[sqlite3.Connection]:
        conn = self._create_connection()
        try:
            yield conn
            conn.commit()
        finally:
            conn.close()

    def log_run_start(self, experiment: str, config_hash: str, output_dir: str | Path) -> int:
        with self.get_connection() as conn:
            cursor = conn.execute(
                """
                INSERT INTO runs (experiment, config_hash, output_dir, start_time)
                VALUES (?, ?, ?, ?)
                """,
                (experiment, config_hash, str(output_dir), datetime.now().isoformat()),
            )
            return int(cursor.lastrowid)

    def log_run_end(self, run_id: int, status: str = "finished") -> None:
        if status not in RUN_STATUSES:
            raise ValueError(f"unknown run status {status!r}")
        with self.get_connection() as conn:
            row = conn.execute("SELECT start_time FROM runs WHERE id = ?", (run_id,)).fetchone()
            if not row:
                return
            now = datetime.now()
            duration = (now - datetime.fromisoformat(row["start_time"])).total_seconds()
            conn.execute(
                """
                UPDATE runs
                SET end_time = ?, duration = ?, status = ?,
                    cells = (SELECT COUNT(*) FROM cell_results WHERE run_id = ?),
                    failed_cells = (
                        SELECT COUNT(*) FROM cell_results
                        WHERE run_id = ? AND status != 'ok'
                    )
                WHERE id = ?
                """,
                (now.isoformat(), duration, status, run_id, run_id, run_id),
            )

    def log_cell_result(
        self,
        run_id: int,
        algorithm: str,
        group: str,
        seed: int,
        duration: float,
        ok: bool,
        final_metric: float | None = None,
    ) -> None:
        with self.get_connection() as conn:
            conn.execute(
                """
                INSERT INTO cell_results
                    (run_id, algorithm, cell_group, seed, duration, status, final_metric)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (run_id, algorithm, group, seed, duration, "ok" if ok else "error", final_metric),
            )

    def log_error(
        self,
        run_id: int | None,
        error_type: str,
        error_message: str,
        stack_trace: str | None = None,
        severity: str = "ERROR",
    ) -> None:
        with self.get_connection() as conn:
            conn.execute(
                """
                INSERT INTO error_log
                    (run_id, error_type, error_message, stack_trace, timestamp, severity)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                (
                    run_id,
                    error_type,
                    error_message,
                    stack_trace,
                    datetime.now().isoformat(),
                    severity,
                ),
            )

    def recent_runs(self, limit: int = 20, experiment: str | None = None) -> list[dict[str, Any]]:
        query = "SELECT * FROM runs"
        params: tuple = ()
        if experiment:
            query += " WHERE experiment = ?"
            params = (experiment,)
        query += " ORDER BY id DESC LIMIT ?"
        with self.get_connection() as conn:
            return [dict(row) for row in conn.execute(query, (*params, limit)).fetchall()]

    def get_run_statistics(self, run_id: int) -> dict[str, Any]:
        with self.get_connection() as conn:
            row = conn.execute(
                """
                SELECT
                    COUNT(*) AS cells,
                    SUM(CASE WHEN status = 'ok' THEN 0 ELSE 1 END) AS failed,
                    AVG(duration) AS avg_cell_seconds,
                    SUM(duration) AS total_cell_seconds
                FROM cell_results
                WHERE run_id = ?
                """,
                (run_id,),
            ).fetchone()
            errors = conn.execute(
                "SELECT COUNT(*) AS n FROM error_log WHERE run_id = ?", (run_id,)
            ).fetchone()
            return {
                "cells": row["cells"] if row else 0,
                "failed": (row["failed"] or 0) if row else 0,
                "avg_cell_seconds": (row["avg_cell_seconds"] or 0.0) if row else 0.0,
                "total_cell_seconds": (row["total_cell_seconds"] or 0.0) if row else 0.0,
                "errors": errors["n"] if errors else 0,
            }
