"""Closed interval and axis-aligned box primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; infinities allowed transiently in arithmetic."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval bounds must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"empty interval bounds [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        if math.isinf(self.lo) or math.isinf(self.hi):
            return 0.0 if math.isinf(self.lo) and math.isinf(self.hi) else (
                self.hi - 1.0 if math.isinf(self.lo) else self.lo + 1.0
            )
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: one interval per variable, in constraint order."""

    intervals: tuple[Interval, ...]

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def widths(self) -> np.ndarray:
        return np.array([iv.width for iv in self.intervals])

    def midpoint(self) -> np.ndarray:
        return np.array([iv.mid for iv in self.intervals])

    def contains(self, point: Sequence[float]) -> bool:
        return all(iv.contains(float(x)) for iv, x in zip(self.intervals, point))

    def replace(self, dim: int, iv: Interval) -> "Box":
        parts = list(self.intervals)
        parts[dim] = iv
        return Box(tuple(parts))

    def split(self, dim: int) -> tuple["Box", "Box"]:
        iv = self.intervals[dim]
        mid = iv.mid
        return self.replace(dim, Interval(iv.lo, mid)), self.replace(dim, Interval(mid, iv.hi))

    def volume(self) -> float:
        v = 1.0
        for iv in self.intervals:
            v *= iv.width
        return v

    def to_bounds(self) -> list[list[float]]:
        return [[iv.lo, iv.hi] for iv in self.intervals]

    @staticmethod
    def from_bounds(bounds: Sequence[Sequence[float]]) -> "Box":
        return Box(tuple(Interval(float(lo), float(hi)) for lo, hi in bounds))
