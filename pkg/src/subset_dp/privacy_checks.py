"""Exact privacy-loss checks on neighbouring datasets.

Each mechanism here has a closed-form output law, so the worst-case log
ratio between neighbours can be computed rather than estimated.
"""

from __future__ import annotations

import numpy as np

from .dataset import Grid, Interval, SortedDataset
from .mean import BoundedMeanParams, bounded_mean_log_density
from .monotone import PropertySpec, inverse_sensitivity_distribution
from .noise import density_log_ratio_bound
from .threshold import ThresholdParams, threshold_density


def random_neighbours(gen: np.random.Generator, values, max_n: int = 8):
    """A random dataset of 1..max_n points drawn from ``values`` and a
    neighbour that differs by one added or removed point (both nonempty)."""
    values = np.asarray(values, dtype=float)
    n = int(gen.integers(1, max_n + 1))
    base = gen.choice(values, n)
    if n == 1 or (n < max_n and gen.random() < 0.5):
        other = np.append(base, gen.choice(values))
    else:
        other = np.delete(base, gen.integers(0, n))
    return SortedDataset(base), SortedDataset(other)


def threshold_log_ratio(d1: SortedDataset, d2: SortedDataset, p: ThresholdParams) -> float:
    r = p.target_rank
    r = min(r, len(d1), len(d2))
    q = ThresholdParams(p.range, r, p.alpha, p.epsilon)
    return density_log_ratio_bound(threshold_density(d1, q), threshold_density(d2, q))


def bounded_mean_log_ratio(d1: SortedDataset, d2: SortedDataset, p: BoundedMeanParams,
                           points: int = 1000) -> float:
    """Max log-density ratio of the released (n_hat, s_hat) pair over a grid."""
    w = p.interval.width
    side = int(np.ceil(np.sqrt(points)))
    n_lo = min(len(d1), len(d2)) - 10 / p.epsilon
    n_hi = max(len(d1), len(d2)) + 10 / p.epsilon
    s_span = (max(len(d1), len(d2)) + 1) * w / 2 + 10 * w / p.epsilon
    nn, ss = np.meshgrid(np.linspace(n_lo, n_hi, side), np.linspace(-s_span, s_span, side))
    nn, ss = nn.ravel()[:points], ss.ravel()[:points]
    f1 = bounded_mean_log_density(d1, p, nn, ss)
    f2 = bounded_mean_log_density(d2, p, nn, ss)
    return float(np.max(np.abs(f1 - f2)))


def inverse_sensitivity_log_ratio(d1: SortedDataset, d2: SortedDataset, grid: Grid, epsilon: float,
                                  spec: PropertySpec) -> float:
    _, p1, _ = inverse_sensitivity_distribution(d1, grid, epsilon, spec)
    _, p2, _ = inverse_sensitivity_distribution(d2, grid, epsilon, spec)
    return float(np.max(np.abs(np.log(p1) - np.log(p2))))


def run_selftest(pairs: int = 200, seed: int = 0) -> list:
    """Analytic DP checks for the three base mechanisms.

    Returns ``(name, worst log ratio, epsilon, passed)`` tuples.
    """
    from .monotone import mean_spec, median_spec

    gen = np.random.default_rng(seed)
    out = []
    eps = 1.0
    # threshold mechanism on [0, 1]
    worst = 0.0
    for _ in range(pairs):
        d1, d2 = random_neighbours(gen, np.round(gen.uniform(0, 1, 12), 3))
        r = int(gen.integers(1, min(len(d1), len(d2)) + 1))
        alpha = float(gen.uniform(0.01, 0.5))
        worst = max(worst, threshold_log_ratio(d1, d2, ThresholdParams(Interval(0, 1), r, alpha, eps)))
    out.append(("private_threshold", worst, eps, worst <= eps + 1e-9))
    # bounded mean on [0, 1]
    worst = 0.0
    for _ in range(pairs):
        d1, d2 = random_neighbours(gen, gen.uniform(0, 1, 12))
        worst = max(worst, bounded_mean_log_ratio(d1, d2, BoundedMeanParams(Interval(0, 1), eps)))
    out.append(("bounded_mean", worst, eps, worst <= eps + 1e-9))
    # inverse sensitivity on a small grid
    grid = Grid(0.0, 0.25, 5)
    for spec in (mean_spec(), median_spec()):
        worst = 0.0
        for _ in range(pairs // 4):
            d1, d2 = random_neighbours(gen, grid.values(), max_n=5)
            worst = max(worst, inverse_sensitivity_log_ratio(d1, d2, grid, eps, spec))
        out.append((f"inverse_sensitivity[{spec.name}]", worst, eps, worst <= eps + 1e-9))
    return out
