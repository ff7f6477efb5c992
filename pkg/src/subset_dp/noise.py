"""Seeded randomness: Laplace noise and exact piecewise-constant sampling.

The generator is numpy's Philox (a 64-bit counter-based PRNG), so a seed and
a call sequence fully determine every draw. Nothing here is hardened against
floating-point side channels; these samplers are for analysis and
experimentation, not for deployment against an adaptive adversary.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

_TWO53 = float(2**53)


class Rng:
    """Single-owner random stream. Do not share one instance across threads."""

    deterministic = False

    def __init__(self, seed: int = 0):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def open_uniform(self, size=None):
        """Uniform draws on the open interval (0, 1); never returns 0 or 1."""
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        return (k + 0.5) / _TWO53

    def spawn(self, *keys: int) -> "Rng":
        """Independent child stream keyed by ``keys`` (deterministic in seed and keys)."""
        ss = np.random.SeedSequence([self.seed, *[int(k) for k in keys]])
        return type(self)(int(ss.generate_state(1, dtype=np.uint64)[0]))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(seed={self.seed})"


class ZeroNoiseRng(Rng):
    """Test-mode stream: Laplace draws are exactly zero and density samplers
    return the mode, so whole pipelines become deterministic functions of the data."""

    deterministic = True


class PiecewiseConstantDensity:
    """Density on ``[b_0, b_M]`` that is constant on each ``[b_i, b_{i+1})``.

    Levels are kept as log-levels (``-inf`` for zero) so that weights such as
    ``exp(-eps * loss / 2)`` with large losses never underflow before
    normalization.
    """

    __slots__ = ("breakpoints", "log_levels", "log_normalizer")

    def __init__(self, breakpoints: Sequence[float], log_levels: Sequence[float]):
        b = np.asarray(breakpoints, dtype=float)
        ll = np.asarray(log_levels, dtype=float)
        if b.ndim != 1 or b.size < 2 or ll.shape != (b.size - 1,):
            raise ValueError("need M+1 breakpoints for M levels")
        if not np.all(np.isfinite(b)) or np.any(np.diff(b) < 0):
            raise ValueError("breakpoints must be finite and nondecreasing")
        if np.any(np.isnan(ll)) or np.any(ll == np.inf):
            raise ValueError("log-levels must be finite or -inf")
        lw = _log_weights(b, ll)
        top = lw.max()
        if not np.isfinite(top):
            raise ValueError("density has no mass")
        b.setflags(write=False)
        ll.setflags(write=False)
        self.breakpoints = b
        self.log_levels = ll
        self.log_normalizer = float(top + np.log(np.exp(lw - top).sum()))

    @classmethod
    def from_levels(cls, breakpoints: Sequence[float], levels: Sequence[float]) -> "PiecewiseConstantDensity":
        lv = np.asarray(levels, dtype=float)
        if np.any(lv < 0):
            raise ValueError("levels must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(breakpoints, np.log(lv))

    @property
    def normalizer(self) -> float:
        return float(np.exp(self.log_normalizer))

    @property
    def levels(self) -> np.ndarray:
        return np.exp(self.log_levels)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def log_density(self) -> np.ndarray:
        """Normalized log-density on each interval."""
        return self.log_levels - self.log_normalizer

    def interval_probabilities(self) -> np.ndarray:
        return np.exp(_log_weights(self.breakpoints, self.log_levels) - self.log_normalizer)

    def mass_above(self, x: float) -> float:
        """Probability that a draw exceeds ``x``."""
        b = self.breakpoints
        lo = np.clip(b[:-1], x, None)
        width = np.clip(b[1:] - lo, 0.0, None)
        with np.errstate(divide="ignore"):
            return float(np.exp(self.log_density() + np.log(width)).sum())

    def mode(self) -> float:
        """Midpoint of the leftmost maximal run of top-density intervals."""
        # zero-width intervals share endpoints with their neighbours, so skipping
        # them keeps consecutive survivors contiguous
        pos = np.flatnonzero(self.widths > 0)
        vals = self.log_levels[pos]
        top = vals.max()
        k = int(np.argmax(vals == top))
        m = k
        while m + 1 < pos.size and vals[m + 1] == top:
            m += 1
        return 0.5 * (self.breakpoints[pos[k]] + self.breakpoints[pos[m] + 1])


def _log_weights(b: np.ndarray, ll: np.ndarray) -> np.ndarray:
    w = np.diff(b)
    with np.errstate(divide="ignore"):
        out = ll + np.log(w)
    out[(w == 0) | np.isneginf(ll)] = -np.inf
    return out


def sample_laplace(scale: float, rng: Rng, size: Optional[int] = None):
    """Laplace(0, scale) by inverting the CDF of an open-interval uniform."""
    if scale <= 0:
        raise ValueError("Laplace scale must be positive")
    if rng.deterministic:
        return 0.0 if size is None else np.zeros(size)
    u = rng.open_uniform(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_piecewise(density: PiecewiseConstantDensity, rng: Rng, size: Optional[int] = None):
    """Exact draw: pick an interval by its mass, then a uniform point inside it."""
    if rng.deterministic:
        m = density.mode()
        return m if size is None else np.full(size, m)
    lw = _log_weights(density.breakpoints, density.log_levels)
    cum = np.cumsum(np.exp(lw - lw.max()))
    u = rng.uniform(size) * cum[-1]
    idx = np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)
    lo = density.breakpoints[idx]
    hi = density.breakpoints[idx + 1]
    x = lo + rng.uniform(size) * (hi - lo)
    return float(x) if size is None else x


def density_log_ratio_bound(f1: PiecewiseConstantDensity, f2: PiecewiseConstantDensity) -> float:
    """``max |log(p1/p2)|`` over a common refinement of both breakpoint lists.

    Outside its own support a density counts as zero, so mass on one side
    only yields ``+inf``.
    """
    cuts = np.union1d(f1.breakpoints, f2.breakpoints)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    mids = mids[cuts[1:] > cuts[:-1]]
    if not mids.size:
        return 0.0
    p1 = _log_density_at(f1, mids)
    p2 = _log_density_at(f2, mids)
    both_zero = np.isneginf(p1) & np.isneginf(p2)
    one_zero = np.isneginf(p1) ^ np.isneginf(p2)
    if np.any(one_zero):
        return float("inf")
    diff = np.abs(p1 - p2)[~both_zero]
    return float(diff.max()) if diff.size else 0.0


def _log_density_at(f: PiecewiseConstantDensity, xs: np.ndarray) -> np.ndarray:
    b = f.breakpoints
    idx = np.searchsorted(b, xs, side="right") - 1
    inside = (xs >= b[0]) & (xs < b[-1]) & (idx >= 0) & (idx < b.size - 1)
    out = np.full(xs.shape, -np.inf)
    ld = f.log_density()
    out[inside] = ld[idx[inside]]
    # zero-width intervals cannot contain a midpoint, so no further masking is needed
    return out
