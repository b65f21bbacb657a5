"""Learning-curve bookkeeping: threshold crossing and cross-seed summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


class AlignmentError(ValueError):
    """Raised when series that should share a checkpoint grid do not."""


@dataclass(frozen=True)
class CurvePoint:
    seed: int
    samples: int
    metric: str
    value: float


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    algorithm: str
    group: str
    samples: int
    mean: float
    std: float
    n_seeds: int


GroupKey = tuple[str, str, str]


def _pairs(curve: Iterable) -> list[tuple[int, float]]:
    pairs = []
    for point in curve:
        if isinstance(point, CurvePoint):
            pairs.append((point.samples, point.value))
        else:
            samples, value = point
            pairs.append((int(samples), float(value)))
    return pairs


def samples_to_threshold(
    curve: Sequence, threshold: float, patience: int = 1, direction: str = "below"
) -> int | None:
    """First sample count whose metric meets the threshold for `patience` checkpoints in a row.

    Returns None (censored) when no such run exists; the whole window must be
    present in the curve.
    """
    points = _pairs(curve)
    if not points:
        raise ValueError("cannot measure an empty curve")
    if patience < 1:
        raise ValueError(f"patience must be >= 1, got {patience}")
    if direction == "below":
        meets = [value <= threshold for _, value in points]
    elif direction == "above":
        meets = [value >= threshold for _, value in points]
    else:
        raise ValueError(f"direction must be 'below' or 'above', got {direction!r}")
    for start in range(len(points) - patience + 1):
        if all(meets[start : start + patience]):
            return points[start][0]
    return None


def summarize(
    series: Mapping[GroupKey, Mapping[int, Sequence]], strict: bool = True
) -> list[SummaryRow]:
    """Per-group mean and population std at each checkpoint, groups in key order.

    With strict=False, each group is summarised over the longest prefix of
    checkpoints that all of its seeds share.
    """
    rows: list[SummaryRow] = []
    for key in sorted(series):
        experiment, algorithm, group = key
        by_seed = {seed: _pairs(curve) for seed, curve in series[key].items()}
        if not by_seed:
            continue
        grids = [[samples for samples, _ in curve] for curve in by_seed.values()]
        reference = grids[0]
        if strict:
            for grid in grids[1:]:
                if grid != reference:
                    raise AlignmentError(
                        f"checkpoint grids differ within {experiment}/{algorithm}/{group}"
                    )
            length = len(reference)
        else:
            length = min(len(grid) for grid in grids)
            for index in range(length):
                if any(grid[index] != reference[index] for grid in grids):
                    length = index
                    break
        values = np.array([[value for _, value in curve[:length]] for curve in by_seed.values()])
        for index in range(length):
            column = values[:, index]
            rows.append(
                SummaryRow(
                    experiment=experiment,
                    algorithm=algorithm,
                    group=group,
                    samples=reference[index],
                    mean=float(column.mean()),
                    std=float(column.std()),
                    n_seeds=len(by_seed),
                )
            )
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("need at least two points for a slope")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def median_or_censored(values: Sequence[int | None]) -> float:
    """Median with censored entries (None) counted as +inf."""
    if not values:
        raise ValueError("no values")
    return float(np.median([np.inf if value is None else value for value in values]))
