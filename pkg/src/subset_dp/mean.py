"""Private mean estimation: the bounded-range baseline and the subset-optimal
estimator that first finds clipping thresholds privately."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import (
    Interval,
    SortedDataset,
    clip,
    inverse_epsilon_count,
    lower_trim,
    upper_trim,
)
from .noise import Rng, sample_laplace
from .report import EstimateReport, Stage
from .threshold import ThresholdParams, private_threshold, upper_rank_threshold

# |n_hat| below this is treated as zero and the midpoint is returned
_TINY_COUNT = 1e-12


@dataclass(frozen=True)
class BoundedMeanParams:
    interval: Interval
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def bounded_mean(d: SortedDataset, p: BoundedMeanParams, rng: Rng) -> float:
    """epsilon-DP mean of data known to lie in ``p.interval``.

    Noisy count (Laplace scale 2/eps) and noisy centred sum (scale w/eps),
    then the ratio clipped back into the interval.
    """
    if not d.within(p.interval):
        raise ValueError(f"dataset not contained in [{p.interval.lo}, {p.interval.hi}]")
    w = p.interval.width
    m = p.interval.midpoint
    n_hat = len(d) + sample_laplace(2.0 / p.epsilon, rng)
    if w == 0:
        return m
    s_hat = float(np.sum(d.values - m)) + sample_laplace(w / p.epsilon, rng)
    if abs(n_hat) < _TINY_COUNT:
        return m
    return float(np.clip(s_hat / n_hat, -w / 2, w / 2) + m)


def bounded_mean_log_density(d: SortedDataset, p: BoundedMeanParams, n_hat, s_hat):
    """Log joint density of the released ``(n_hat, s_hat)`` pair given ``d``.

    The output is a post-processing of this pair, so bounding the log-ratio
    of this density between neighbours bounds the privacy loss.
    """
    w = p.interval.width
    m = p.interval.midpoint
    n = len(d)
    s = float(np.sum(np.clip(d.values, p.interval.lo, p.interval.hi) - m))
    bn = 2.0 / p.epsilon
    bs = w / p.epsilon
    return (-np.abs(np.asarray(n_hat) - n) / bn - math.log(2 * bn)
            - np.abs(np.asarray(s_hat) - s) / bs - math.log(2 * bs))


def risk_proxy(d: SortedDataset, epsilon: float) -> float:
    """Gap between the means after trimming ceil(1/eps) points from each end.

    Up to a constant in ``[1/(2e^2), 1]`` this is the subset risk of mean
    estimation at privacy level ``epsilon``.
    """
    k = inverse_epsilon_count(epsilon)
    if len(d) <= k:
        raise ValueError(f"need more than ceil(1/eps) = {k} points, got {len(d)}")
    return max(0.0, lower_trim(d, k).mean() - upper_trim(d, k).mean())


@dataclass(frozen=True)
class SubsetMeanParams:
    R: float
    epsilon: float
    gamma: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def derive(self, n: int) -> dict:
        """Threshold-search constants for a dataset of size ``n``."""
        eps = self.epsilon
        alpha = self.gamma / n
        zeta = alpha / (self.R * n * eps)
        log_term = math.log(2 * self.R / (alpha * zeta))
        beta = (2.0 / eps) * log_term
        return {
            "alpha": alpha,
            "zeta": zeta,
            "beta": beta,
            "log_term": log_term,
            "t_l": math.ceil(1.0 / eps + beta),
            "t_u": math.floor(n - 1.0 / eps - beta),
        }

    def min_size(self, n: int) -> int:
        c = self.derive(n)
        return 2 * (inverse_epsilon_count(self.epsilon) + math.ceil(c["beta"])) + 1


def subset_optimal_mean(d: SortedDataset, p: SubsetMeanParams, rng: Rng) -> EstimateReport:
    """3*epsilon-DP mean whose error tracks the subset risk of ``d``."""
    n = len(d)
    dom = Interval.symmetric(p.R)
    if not n or not d.within(dom):
        raise ValueError(f"dataset must be nonempty and inside [-{p.R}, {p.R}]")
    c = p.derive(n)
    if n < p.min_size(n) or c["t_l"] < 1 or c["t_u"] > n or c["t_l"] > c["t_u"]:
        raise ValueError(
            f"dataset too small: n={n} but the rank targets need n >= {p.min_size(n)} "
            f"(t_l={c['t_l']}, t_u={c['t_u']})"
        )
    if c["alpha"] > p.R:
        raise ValueError("gamma too large for the range: alpha = gamma/n must not exceed R")

    lo = private_threshold(d, ThresholdParams(dom, c["t_l"], c["alpha"], p.epsilon), rng)
    hi = upper_rank_threshold(d, ThresholdParams(dom, n - c["t_u"], c["alpha"], p.epsilon), rng)
    lo, hi = min(lo, hi), max(lo, hi)
    iv = Interval(lo, hi)
    est = bounded_mean(clip(d, iv), BoundedMeanParams(iv, p.epsilon), rng)
    return EstimateReport(
        estimate=est,
        epsilon_total=3 * p.epsilon,
        stages=[
            Stage("lower_threshold", p.epsilon, lo),
            Stage("upper_threshold", p.epsilon, hi),
            Stage("bounded_mean", p.epsilon, est),
        ],
        params={
            "mode": "subset",
            "R": p.R,
            "epsilon": p.epsilon,
            "gamma": p.gamma,
            "n": n,
            **{k: c[k] for k in ("alpha", "zeta", "beta", "t_l", "t_u")},
        },
        seed=getattr(rng, "seed", None),
    )


def naive_mean(d: SortedDataset, R: float, epsilon: float, rng: Rng) -> EstimateReport:
    """Baseline: the bounded mean over the whole public range ``[-R, R]``."""
    iv = Interval.symmetric(R)
    est = bounded_mean(d, BoundedMeanParams(iv, epsilon), rng)
    return EstimateReport(
        estimate=est,
        epsilon_total=epsilon,
        stages=[Stage("bounded_mean", epsilon, est)],
        params={"mode": "naive", "R": R, "epsilon": epsilon, "n": len(d)},
        seed=getattr(rng, "seed", None),
    )


def subset_mean_error_bound(d: SortedDataset, p: SubsetMeanParams) -> float:
    """Explicit right-hand side of the expected-error guarantee, with the
    risk replaced by :func:`risk_proxy`."""
    n = len(d)
    c = p.derive(n)
    proxy = risk_proxy(d, p.epsilon)
    return ((56 + 44 * c["log_term"]) * proxy
            + c["alpha"] * (6 / (p.epsilon * n) + 1)
            + 2 * p.R * c["zeta"])


def trim_bias_ratio_check(d: SortedDataset, n1: int, n2: int) -> bool:
    """Check that trimming ``n2`` points shifts the mean at most ``2*n2/n1``
    times as much as trimming ``n1``, on both sides."""
    n = len(d)
    if not 1 <= n1 <= n2 or 2 * n2 > n:
        raise ValueError(f"need 1 <= n1 <= n2 <= n/2, got n1={n1}, n2={n2}, n={n}")
    mu = d.mean()
    slack = 1e-12 * (1.0 + float(np.max(np.abs(d.values))))
    ratio = 2.0 * n2 / n1
    lower_ok = lower_trim(d, n2).mean() - mu <= ratio * (lower_trim(d, n1).mean() - mu) + slack
    upper_ok = mu - upper_trim(d, n2).mean() <= ratio * (mu - upper_trim(d, n1).mean()) + slack
    return bool(lower_ok and upper_ok)
