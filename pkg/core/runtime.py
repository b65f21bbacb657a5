"""Worker pool for independent experiment cells."""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from core.rng import RngStream, rng_derive


@dataclass(frozen=True)
class Cell:
    """One (experiment, algorithm, group, seed) unit of work."""

    experiment: str
    algorithm: str
    group: str
    seed: int

    def rng(self, master_seed: int) -> RngStream:
        return rng_derive(master_seed, [self.experiment, self.algorithm, self.group, self.seed])

    def label(self) -> str:
        return f"{self.experiment}/{self.algorithm}/{self.group}/seed={self.seed}"


@dataclass
class CellResult:
    cell: Cell
    value: Any = None
    duration: float = 0.0
    error: BaseException | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class CellRunner:
    """Runs cells on a thread pool and hands results back in cell order.

    ``on_result`` is called from worker threads as cells finish and must not
    influence the returned values.
    """

    def __init__(
        self,
        workers: int = 1,
        logger=None,
        on_result: Callable[[CellResult], None] | None = None,
    ):
        self.workers = max(1, workers)
        self.logger = logger
        self.on_result = on_result
        self._lock = threading.RLock()
        self.completed = 0

    def _execute(self, cell: Cell, work: Callable[[Cell], Any]) -> CellResult:
        started = time.perf_counter()
        try:
            result = CellResult(cell, value=work(cell))
        except Exception as exc:  # noqa: BLE001 - reported per cell, re-raised in order
            result = CellResult(cell, error=exc)
        result.duration = time.perf_counter() - started
        with self._lock:
            self.completed += 1
            if self.logger:
                level = "DEBUG" if result.ok else "ERROR"
                self.logger.log(
                    level,
                    f"Cell {cell.label()} {'done' if result.ok else 'failed'}",
                    seconds=round(result.duration, 3),
                )
            if self.on_result:
                self.on_result(result)
        return result

    def run(
        self, cells: Sequence[Cell], work: Callable[[Cell], Any], raise_errors: bool = True
    ) -> list[CellResult]:
        if self.workers == 1 or len(cells) <= 1:
            results = [self._execute(cell, work) for cell in cells]
        else:
            with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="cell") as pool:
                results = list(pool.map(lambda cell: self._execute(cell, work), cells))
        if raise_errors:
            for result in results:
                if result.error is not None:
                    raise result.error
        return results
