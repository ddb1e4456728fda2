"""Fairness and convergence metrics over experiment records.

Everything here works in floats: records arrive from the exact-arithmetic
core, but inequality statistics are reporting-layer quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ParticipationRecord",
    "ConvergenceCurve",
    "EmptySample",
    "AllZeroSample",
    "ZeroEpps",
    "InsufficientRecords",
    "gini",
    "lead_ratio",
    "unsatisfied_fraction",
    "gini_table",
    "UNSATISFIED_THRESHOLD",
]

UNSATISFIED_THRESHOLD = 1.10


class EmptySample(ValueError):
    """No values to aggregate."""


class AllZeroSample(ValueError):
    """Gini is undefined when every value is zero."""


class ZeroEpps(ValueError):
    """A lead ratio needs a positive proportional share."""


class InsufficientRecords(ValueError):
    """A Gini cell needs at least two records."""


@dataclass(frozen=True)
class ParticipationRecord:
    """One agent's outcome in one convoy: the unit every experiment emits.

    `ratio` is actual lead over the ex-post proportional share (computed
    when omitted).  `mechanism`, `rotations` and `net_utility` carry the
    reporting columns alongside.
    """

    agent: str | int
    convoy: str | int
    actual_lead: float
    epps: float
    ratio: float | None = None
    mechanism: str = ""
    rotations: int = 0
    net_utility: float = 0.0

    def __post_init__(self) -> None:
        if not self.epps > 0:
            raise ZeroEpps(f"record ({self.convoy}, {self.agent}) has epps <= 0")
        if self.actual_lead < 0:
            raise ValueError("actual lead must be non-negative")
        if self.ratio is None:
            object.__setattr__(self, "ratio", self.actual_lead / self.epps)


@dataclass(frozen=True)
class ConvergenceCurve:
    """Unsatisfied-vehicle fraction as a function of mean participations.

    `points` pairs each checkpoint's mean participation count with the
    fraction; `band` gives the one-standard-deviation envelope (equal to the
    point value for single-run curves).
    """

    points: tuple[tuple[float, float], ...]
    band: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(map(tuple, self.points)))
        object.__setattr__(self, "band", tuple(map(tuple, self.band)))
        if len(self.points) != len(self.band):
            raise ValueError("band must have one entry per point")
        for _, y in self.points:
            if not 0.0 <= y <= 1.0:
                raise ValueError("fractions must lie in [0, 1]")


def gini(values: Iterable[float]) -> float:
    """Gini coefficient of a non-negative population.

    Mean-absolute-difference form, computed in O(n log n) via the sorted
    identity sum((2i - n - 1) * x_(i)) / (n^2 * mean).  0 means perfect
    equality; the supremum for n values is (n - 1) / n.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptySample("gini of an empty population")
    if np.any(arr < 0):
        raise ValueError("gini requires non-negative values")
    total = float(arr.sum())
    if total == 0.0:
        raise AllZeroSample("gini is undefined when all values are zero")
    srt = np.sort(arr)
    n = arr.size
    weights = 2.0 * np.arange(1, n + 1) - n - 1
    return float(np.dot(weights, srt) / (n * total))


def lead_ratio(record: ParticipationRecord) -> float:
    """Actual lead over ex-post proportional share; 1.0 is exactly fair."""
    if not record.epps > 0:
        raise ZeroEpps(f"record ({record.convoy}, {record.agent}) has epps <= 0")
    return record.actual_lead / record.epps


def unsatisfied_fraction(
    ratios: Iterable[float], threshold: float = UNSATISFIED_THRESHOLD
) -> float:
    """Fraction of ratios strictly above the threshold (default 1.10)."""
    values = list(ratios)
    if not values:
        raise EmptySample("unsatisfied fraction of an empty population")
    return sum(1 for r in values if r > threshold) / len(values)


def gini_table(
    groups: Mapping[object, Sequence[ParticipationRecord]],
) -> dict[object, float]:
    """Gini of pooled lead ratios per group (mechanism, configuration, ...).

    Each cell needs at least two records; smaller cells raise
    InsufficientRecords rather than reporting a meaningless 0.
    """
    table: dict[object, float] = {}
    for key, records in groups.items():
        records = list(records)
        if len(records) < 2:
            raise InsufficientRecords(
                f"gini cell {key!r} has {len(records)} record(s); need at least 2"
            )
        table[key] = gini([r.ratio for r in records])
    return table
