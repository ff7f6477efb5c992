"""Private approximate rank thresholds via the exponential mechanism.

The loss of a candidate threshold ``tau`` is the smallest rank error of any
point within ``alpha`` of it. Rank error is nonincreasing up to the set of
exact rank-r thresholds and nondecreasing after it, so the window minimum
has the closed form

    loss(tau) = max(0, #{x < tau - alpha} - r, r - #{x <= tau + alpha})

which only changes where ``tau`` crosses some ``x +/- alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Grid, Interval, SortedDataset, ranks_of
from .noise import PiecewiseConstantDensity, Rng, sample_piecewise


@dataclass(frozen=True)
class ThresholdParams:
    range: Interval
    target_rank: int
    alpha: float
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.alpha <= self.range.width / 2:
            raise ValueError(
                f"alpha={self.alpha} must lie in (0, (b-a)/2] = (0, {self.range.width / 2}]"
            )

    def check(self, d: SortedDataset) -> None:
        if not 1 <= self.target_rank <= len(d):
            raise ValueError(f"target rank {self.target_rank} outside [1, {len(d)}]")
        if not d.within(self.range):
            raise ValueError(f"dataset not contained in [{self.range.lo}, {self.range.hi}]")


def beta_for(zeta: float, epsilon: float, range_width: float, alpha: float) -> float:
    """Rank-error bound that holds with probability at least ``1 - zeta``."""
    if not 0 < zeta < 1:
        raise ValueError("zeta must lie in (0, 1)")
    return (2.0 / epsilon) * math.log(range_width / (alpha * zeta))


def grid_beta_for(zeta: float, epsilon: float, grid_count: int) -> float:
    """Rank-error bound for the grid-rounded threshold."""
    return (2.0 / epsilon) * math.log(3 * grid_count / zeta)


@dataclass(frozen=True, eq=False)
class RankWindowLoss:
    """Integer step function on ``[breakpoints[0], breakpoints[-1]]``.

    ``levels[i]`` is the loss on the open interval between consecutive
    breakpoints; adjacent equal levels are merged.
    """

    breakpoints: np.ndarray
    levels: np.ndarray
    data: SortedDataset
    target_rank: int
    alpha: float

    def at(self, tau) -> np.ndarray | int:
        """Exact loss at arbitrary points, including breakpoints."""
        v = self.data.values
        t = np.asarray(tau, dtype=float)
        below = np.searchsorted(v, t - self.alpha, side="left")
        upto = np.searchsorted(v, t + self.alpha, side="right")
        out = np.maximum(0, np.maximum(below - self.target_rank, self.target_rank - upto))
        return int(out) if out.ndim == 0 else out

    def to_density(self, epsilon: float) -> PiecewiseConstantDensity:
        return PiecewiseConstantDensity(self.breakpoints, -0.5 * epsilon * self.levels.astype(float))

    def zero_runs(self) -> list[tuple[float, float]]:
        b = self.breakpoints
        return [(float(b[i]), float(b[i + 1])) for i in np.flatnonzero(self.levels == 0)]


def build_loss(d: SortedDataset, p: ThresholdParams) -> RankWindowLoss:
    """Piecewise-constant windowed rank-error loss, in O(n log n)."""
    p.check(d)
    a, b = p.range.lo, p.range.hi
    v = d.values
    cand = np.concatenate(([a, b], v - p.alpha, v + p.alpha))
    cand = np.unique(np.clip(cand, a, b))
    if cand.size < 2:
        cand = np.array([a, b])
    mids = 0.5 * (cand[:-1] + cand[1:])
    below = np.searchsorted(v, mids - p.alpha, side="left")
    upto = np.searchsorted(v, mids + p.alpha, side="right")
    r = p.target_rank
    levels = np.maximum(0, np.maximum(below - r, r - upto)).astype(np.int64)
    # merge runs of equal level
    keep = np.concatenate(([True], levels[1:] != levels[:-1]))
    starts = np.flatnonzero(keep)
    bps = np.concatenate((cand[starts], [cand[-1]]))
    return RankWindowLoss(bps, levels[starts], d, r, p.alpha)


def threshold_density(d: SortedDataset, p: ThresholdParams) -> PiecewiseConstantDensity:
    return build_loss(d, p).to_density(p.epsilon)


def private_threshold(d: SortedDataset, p: ThresholdParams, rng: Rng, size=None):
    """epsilon-DP approximate rank-``p.target_rank`` threshold in ``p.range``."""
    return sample_piecewise(threshold_density(d, p), rng, size)


def upper_rank_threshold(d: SortedDataset, p: ThresholdParams, rng: Rng, size=None):
    """Approximate rank-(|D| - r) threshold: mirror the data, threshold, mirror back."""
    mirrored = ThresholdParams(Interval(-p.range.hi, -p.range.lo), p.target_rank, p.alpha, p.epsilon)
    return -private_threshold(d.negate(), mirrored, rng, size)


def private_threshold_grid(d: SortedDataset, grid: Grid, r: int, epsilon: float, rng: Rng, size=None):
    """Threshold for data on an arithmetic grid, rounded to the nearest grid point.

    Runs the continuous mechanism with ``alpha = step / 3`` over the grid's
    span; the rounded output has rank error at most ``grid_beta_for(...)``
    with the stated probability.
    """
    for x in np.unique(d.values):
        if grid.index_of(float(x)) is None:
            raise ValueError(f"value {x} is not on the grid start={grid.start}, step={grid.step}")
    if grid.count == 1:
        return grid.start if size is None else np.full(size, grid.start)
    p = ThresholdParams(Interval(grid.start, grid.stop), r, grid.step / 3.0, epsilon)
    tau = np.asarray(private_threshold(d, p, rng, size))
    k = np.clip(np.rint((tau - grid.start) / grid.step), 0, grid.count - 1)
    out = grid.start + k * grid.step
    return float(out) if size is None else out


def is_approximate_threshold(tau: float, r: int, d: SortedDataset, alpha: float, beta: float) -> bool:
    """Whether some point within ``alpha`` of ``tau`` has rank error at most ``beta``.

    Evaluated directly from rank sets at the window endpoints and the data
    points inside the window (where the window minimum is attained).
    """
    v = d.values
    inside = v[(v >= tau - alpha) & (v <= tau + alpha)]
    cands = np.concatenate(([tau - alpha, tau + alpha], inside))
    return min(ranks_of(float(c), d).distance_to(r) for c in cands) <= beta
