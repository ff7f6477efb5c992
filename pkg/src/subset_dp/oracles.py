"""Brute-force reference implementations for desk-scale cross-checks.

Nothing here shares logic with the fast paths beyond the dataset
primitives: edit lengths are found by breadth-first search over multisets,
and the threshold loss by direct minimization of rank error.
"""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from .dataset import Grid, SortedDataset, rank_error

NOT_FOUND = None


def _neighbours(node: tuple, alphabet: tuple) -> Iterator[tuple]:
    for x in sorted(set(node)):
        i = node.index(x)
        yield node[:i] + node[i + 1:]
    for g in alphabet:
        yield tuple(sorted(node + (g,)))


def edit_ball_layers(d: SortedDataset, alphabet, max_depth: int):
    """Yield ``(depth, multisets at exactly that distance)`` for depth 0..max_depth.

    Additions draw from ``alphabet``; removals take any present value.
    """
    alphabet = tuple(float(g) for g in alphabet)
    start = tuple(float(x) for x in d.values)
    seen = {start}
    layer = [start]
    yield 0, layer
    for depth in range(1, max_depth + 1):
        nxt = []
        for node in layer:
            for nb in _neighbours(node, alphabet):
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        layer = nxt
        yield depth, layer


def _hits(theta_val: float, t: float, beta: float) -> bool:
    return abs(theta_val - t) <= beta / 2 + 1e-9 * beta


def bfs_len_theta(d: SortedDataset, t: float, spec, grid: Grid, max_depth: int) -> Optional[int]:
    """Smallest add/remove distance to a nonempty D' whose property value is
    within beta/2 of ``t``; ``NOT_FOUND`` past ``max_depth``."""
    for depth, layer in edit_ball_layers(d, grid.values(), max_depth):
        for node in layer:
            if node and _hits(spec.theta(SortedDataset(node)), t, grid.step):
                return depth
    return NOT_FOUND


def bfs_omega(d: SortedDataset, k: int, spec, grid: Grid) -> float:
    """Exact max |theta(D') - theta(D)| over the nonempty edit ball of radius k."""
    th = spec.theta(d)
    best = 0.0
    for _, layer in edit_ball_layers(d, grid.values(), k):
        for node in layer:
            if node:
                best = max(best, abs(spec.theta(SortedDataset(node)) - th))
    return best


def grid_loss_oracle(d: SortedDataset, params, taus, samples: int = 10_000) -> np.ndarray:
    """Windowed rank-error loss at each ``tau`` by direct minimization.

    Candidates in each window are ``samples`` evenly spaced points, the two
    window endpoints, and every data point inside the window; since rank
    error is piecewise constant and changes only at data points, this set
    attains the exact minimum.
    """
    a = params.alpha
    r = params.target_rank
    v = d.values
    out = []
    for tau in np.atleast_1d(np.asarray(taus, dtype=float)):
        cands = np.concatenate((np.linspace(tau - a, tau + a, samples), [tau - a, tau + a],
                                v[(v >= tau - a) & (v <= tau + a)]))
        # rank error by counting, not by binary search
        below = (v[None, :] < cands[:, None]).sum(axis=1)
        upto = (v[None, :] <= cands[:, None]).sum(axis=1)
        err = np.where(r < below, below - r, np.where(r > upto, r - upto, 0))
        out.append(int(err.min()))
    return np.array(out)


def grid_loss_oracle_slow(d: SortedDataset, params, tau: float) -> int:
    """Single-point variant built on :func:`rank_error`, for spot checks."""
    a = params.alpha
    v = d.values
    cands = [tau - a, tau + a] + [float(x) for x in v if tau - a <= x <= tau + a]
    return min(rank_error(c, params.target_rank, d) for c in cands)
