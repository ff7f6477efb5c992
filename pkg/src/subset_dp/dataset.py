"""Multiset arithmetic on one-dimensional datasets.

Every mechanism in the package consumes a :class:`SortedDataset`: an immutable
multiset of finite reals that keeps its full sorted sequence (duplicates are
not collapsed) so that rank queries are two binary searches.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np


class DataFormatError(ValueError):
    """Raised when an input file cannot be parsed into finite reals."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    @classmethod
    def symmetric(cls, radius: float) -> "Interval":
        return cls(-float(radius), float(radius))


@dataclass(frozen=True)
class RankSet:
    """Contiguous inclusive range of ranks ``{lo, ..., hi}``."""

    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"invalid rank range {{{self.lo}..{self.hi}}}")

    def __contains__(self, r: int) -> bool:
        return self.lo <= r <= self.hi

    def distance_to(self, r: int) -> int:
        if r < self.lo:
            return self.lo - r
        if r > self.hi:
            return r - self.hi
        return 0


@dataclass(frozen=True)
class Grid:
    """Arithmetic grid ``start + i * step`` for ``i = 0 .. count - 1``."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        if self.count < 1:
            raise ValueError("grid must contain at least one point")

    @property
    def stop(self) -> float:
        return self.start + (self.count - 1) * self.step

    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def index_of(self, x: float, tol: float = 1e-9) -> Optional[int]:
        """Index of the grid point equal to ``x`` (up to ``tol * step``), else None."""
        k = round((x - self.start) / self.step)
        if 0 <= k < self.count and abs(self.start + k * self.step - x) <= tol * self.step:
            return int(k)
        return None

    def nearest(self, x: float) -> float:
        k = min(max(round((x - self.start) / self.step), 0), self.count - 1)
        return self.start + k * self.step

    @classmethod
    def multiples_in(cls, iv: Interval, step: float) -> "Grid":
        """All integer multiples of ``step`` lying in ``iv``."""
        lo = math.ceil(iv.lo / step - 1e-9)
        hi = math.floor(iv.hi / step + 1e-9)
        if hi < lo:
            raise ValueError(f"no multiple of {step} inside [{iv.lo}, {iv.hi}]")
        return cls(lo * step, step, hi - lo + 1)


class SortedDataset:
    """Immutable multiset of finite reals with cached sort order."""

    __slots__ = ("_values", "_range_hint")

    def __init__(self, values: Iterable[float] = (), range_hint: Optional[Interval] = None):
        arr = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                                 dtype=float).ravel())
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("dataset values must be finite")
        if range_hint is not None and arr.size and (arr[0] < range_hint.lo or arr[-1] > range_hint.hi):
            raise ValueError(
                f"dataset spans [{arr[0]}, {arr[-1]}], outside range [{range_hint.lo}, {range_hint.hi}]"
            )
        arr.setflags(write=False)
        self._values = arr
        self._range_hint = range_hint

    @classmethod
    def _from_sorted(cls, arr: np.ndarray, range_hint: Optional[Interval] = None) -> "SortedDataset":
        obj = cls.__new__(cls)
        arr = np.array(arr, dtype=float)
        arr.setflags(write=False)
        obj._values = arr
        obj._range_hint = range_hint
        return obj

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def range_hint(self) -> Optional[Interval]:
        return self._range_hint

    def size(self) -> int:
        return int(self._values.size)

    def __len__(self) -> int:
        return int(self._values.size)

    def __iter__(self):
        return iter(self._values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SortedDataset):
            return NotImplemented
        return self._values.shape == other._values.shape and bool(np.all(self._values == other._values))

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        if len(self) <= 8:
            return f"SortedDataset({self._values.tolist()})"
        return f"SortedDataset(n={len(self)}, min={self._values[0]}, max={self._values[-1]})"

    def mean(self) -> float:
        if not len(self):
            raise ValueError("mean of an empty dataset")
        return float(np.mean(self._values))

    def negate(self) -> "SortedDataset":
        hint = None if self._range_hint is None else Interval(-self._range_hint.hi, -self._range_hint.lo)
        return SortedDataset._from_sorted(-self._values[::-1], hint)

    def with_values(self, extra: Iterable[float]) -> "SortedDataset":
        return SortedDataset(np.concatenate([self._values, np.asarray(list(extra), dtype=float)]))

    def within(self, iv: Interval) -> bool:
        return not len(self) or (self._values[0] >= iv.lo and self._values[-1] <= iv.hi)


def inverse_epsilon_count(epsilon: float) -> int:
    """``ceil(1/epsilon)``: the number of points a budget ``epsilon`` lets us ignore."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return max(1, math.ceil(1.0 / epsilon - 1e-9))


def effective_epsilon(epsilon: float) -> float:
    """Replace ``epsilon`` by ``1 / ceil(1/epsilon)`` so that ``1/epsilon`` is a count."""
    return 1.0 / inverse_epsilon_count(epsilon)


def distance(d1: SortedDataset, d2: SortedDataset) -> int:
    """Add/remove distance: size of the multiset symmetric difference."""
    a, b = d1.values, d2.values
    support = np.union1d(a, b)
    ca = np.searchsorted(a, support, side="right") - np.searchsorted(a, support, side="left")
    cb = np.searchsorted(b, support, side="right") - np.searchsorted(b, support, side="left")
    return int(np.abs(ca - cb).sum())


def lower_trim(d: SortedDataset, m: int) -> SortedDataset:
    """Remove the ``m`` smallest points."""
    if not 0 <= m <= len(d):
        raise ValueError(f"trim count {m} outside [0, {len(d)}]")
    return SortedDataset._from_sorted(d.values[m:], d.range_hint)


def upper_trim(d: SortedDataset, m: int) -> SortedDataset:
    """Remove the ``m`` largest points."""
    if not 0 <= m <= len(d):
        raise ValueError(f"trim count {m} outside [0, {len(d)}]")
    return SortedDataset._from_sorted(d.values[: len(d) - m], d.range_hint)


def ranks_of(tau: float, d: SortedDataset) -> RankSet:
    """Ranks ``r`` for which ``tau`` is a rank-r threshold of ``d``."""
    v = d.values
    return RankSet(int(np.searchsorted(v, tau, side="left")), int(np.searchsorted(v, tau, side="right")))


def rank_error(tau: float, r: int, d: SortedDataset) -> int:
    return ranks_of(tau, d).distance_to(r)


def clip(d: SortedDataset, iv: Interval) -> SortedDataset:
    return SortedDataset._from_sorted(np.clip(d.values, iv.lo, iv.hi))


def round_half_away(q: np.ndarray) -> np.ndarray:
    return np.sign(q) * np.floor(np.abs(q) + 0.5)


def quantize(d: SortedDataset, beta: float) -> SortedDataset:
    """Snap each value to the nearest multiple of ``beta``; half-steps round away from zero."""
    if beta <= 0:
        raise ValueError("quantization step must be positive")
    # rounding is monotone, so sort order survives
    return SortedDataset._from_sorted(round_half_away(d.values / beta) * beta)


def dominates(d1: SortedDataset, d2: SortedDataset) -> bool:
    """First-order stochastic dominance ``d1 ≻ d2`` on normalized empirical CDFs."""
    if not len(d1) or not len(d2):
        raise ValueError("dominance is undefined for empty datasets")
    support = np.union1d(d1.values, d2.values)
    c1 = np.searchsorted(d1.values, support, side="right")
    c2 = np.searchsorted(d2.values, support, side="right")
    # F1 <= F2  <=>  c1 * n2 <= c2 * n1, compared in exact integers
    return bool(np.all(c1 * len(d2) <= c2 * len(d1)))


def read_values(path: str | Path, column: Optional[str] = None) -> list[float]:
    """Load one real per line, or a named column of a CSV file.

    Blank lines are skipped. Anything that is not a finite decimal raises
    :class:`DataFormatError` naming the offending line.
    """
    path = Path(path)
    out: list[float] = []
    with path.open(newline="") as fh:
        if column is None:
            rows = ((i, line.strip()) for i, line in enumerate(fh, start=1))
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or column not in reader.fieldnames:
                raise DataFormatError(f"{path}: no column named {column!r}")
            # header is line 1
            rows = ((i, (row[column] or "").strip()) for i, row in enumerate(reader, start=2))
        for lineno, text in rows:
            if not text:
                continue
            try:
                x = float(text)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not math.isfinite(x):
                raise DataFormatError(f"{path}:{lineno}: non-finite value {text!r}")
            out.append(x)
    return out
