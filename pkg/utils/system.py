"""Host inspection helpers."""

from __future__ import annotations

import os
import platform
import sys
from typing import Any

import numpy as np
import psutil


def get_system_info() -> dict[str, Any]:
    """Best-effort host summary for run metadata, without blocking on CPU sampling."""
    try:
        memory = psutil.virtual_memory()
        return {
            "cpu_count": psutil.cpu_count(logical=True) or os.cpu_count() or 1,
            "physical_cores": psutil.cpu_count(logical=False),
            "total_ram_mb": memory.total // (1024 * 1024),
            "available_ram_mb": memory.available // (1024 * 1024),
            "platform": sys.platform,
            "machine": platform.machine(),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
    except Exception:
        return {
            "cpu_count": os.cpu_count() or 1,
            "physical_cores": None,
            "total_ram_mb": None,
            "available_ram_mb": None,
            "platform": sys.platform,
            "machine": platform.machine(),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }


def available_cores() -> int:
    try:
        return len(psutil.Process().cpu_affinity())
    except (AttributeError, psutil.Error, OSError):
        return psutil.cpu_count(logical=True) or os.cpu_count() or 1


def resolve_workers(requested: int, logger=None) -> int:
    """0 means every available core; larger requests are clamped to the core count."""
    cores = available_cores()
    if requested <= 0:
        return cores
    if requested > cores:
        if logger:
            logger.log("WARNING", "Clamping worker count", requested=requested, cores=cores)
        return cores
    return requested

