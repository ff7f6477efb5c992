"""Monte Carlo harness for private mean estimation.

Errors are measured two ways per cell: against the population mean (the
statistical risk) and against the sample mean (the part caused by privacy).
Datasets are shared across estimators and privacy levels for a given trial
index, so differences between cells are not swamped by sampling noise.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import Interval, SortedDataset, inverse_epsilon_count, lower_trim, upper_trim
from .mean import BoundedMeanParams, SubsetMeanParams, bounded_mean, risk_proxy, subset_optimal_mean
from .monotone import theta_lp
from .noise import Rng

DIST_KINDS = ("gaussian", "uniform", "pareto_tail", "two_point")
ESTIMATORS = ("subset_optimal_mean", "naive_laplace_range", "oracle_trimmed")


@dataclass(frozen=True)
class DistSpec:
    kind: str
    params: dict = field(default_factory=dict)
    clip_R: float = 1e6

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ValueError(f"unknown distribution {self.kind!r}; expected one of {DIST_KINDS}")
        if self.clip_R <= 0:
            raise ValueError("clip_R must be positive")

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0, clip_R=1e6):
        return cls("gaussian", {"mu": mu, "sigma": sigma}, clip_R)

    @classmethod
    def uniform(cls, a=0.0, b=1.0, clip_R=1e6):
        return cls("uniform", {"a": a, "b": b}, clip_R)

    @classmethod
    def pareto_tail(cls, k_exponent=2.5, scale=1.0, center=0.0, clip_R=1e6):
        return cls("pareto_tail", {"k_exponent": k_exponent, "scale": scale, "center": center}, clip_R)

    @classmethod
    def two_point(cls, p=0.5, a=0.0, b=1.0, clip_R=1e6):
        return cls("two_point", {"p": p, "a": a, "b": b}, clip_R)

    @classmethod
    def from_dict(cls, obj: dict) -> "DistSpec":
        obj = dict(obj)
        kind = obj.pop("kind")
        clip = obj.pop("clip_R", 1e6)
        return getattr(cls, kind)(clip_R=clip, **obj)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params, "clip_R": self.clip_R}

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.kind == "gaussian":
            x = gen.normal(p["mu"], p["sigma"], n)
        elif self.kind == "uniform":
            x = gen.uniform(p["a"], p["b"], n)
        elif self.kind == "pareto_tail":
            # symmetric Lomax: |X - c| has survival (1 + y/scale)^(-k)
            u = 1.0 - gen.random(n)
            mag = p["scale"] * (u ** (-1.0 / p["k_exponent"]) - 1.0)
            sign = np.where(gen.random(n) < 0.5, -1.0, 1.0)
            x = p["center"] + sign * mag
        else:
            x = np.where(gen.random(n) < p["p"], p["b"], p["a"])
        return np.clip(x, -self.clip_R, self.clip_R)

    def mean(self) -> float:
        """Mean of the clipped distribution."""
        p = self.params
        lo, hi = -self.clip_R, self.clip_R
        if self.kind == "gaussian":
            mu, s = p["mu"], p["sigma"]
            a, b = (lo - mu) / s, (hi - mu) / s
            pdf = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
            cdf = lambda z: 0.5 * math.erfc(-z / math.sqrt(2))
            inner = mu * (cdf(b) - cdf(a)) + s * (pdf(a) - pdf(b))
            return inner + lo * cdf(a) + hi * (1 - cdf(b))
        if self.kind == "uniform":
            a, b = p["a"], p["b"]
            if a == b:
                return float(np.clip(a, lo, hi))
            # E[clip(U)] by integrating the clipped identity
            ca, cb = np.clip([a, b], lo, hi)
            return ((ca - a) * lo + (cb * cb - ca * ca) / 2 + (b - cb) * hi) / (b - a)
        if self.kind == "pareto_tail":
            c, s, k = p["center"], p["scale"], p["k_exponent"]

            def capped(h):
                # E[min(Z, h)] for Z with survival (1 + z/s)^(-k)
                if h <= 0:
                    return h
                if k == 1:
                    return s * math.log1p(h / s)
                return s / (k - 1) * (1 - (1 + h / s) ** (1 - k))

            return c + 0.5 * capped(hi - c) - 0.5 * capped(c - lo)
        a, b = np.clip([p["a"], p["b"]], lo, hi)
        return float(p["p"] * b + (1 - p["p"]) * a)


@dataclass
class TrialResult:
    n: int
    epsilon: float
    estimator_name: str
    mean_abs_error: float
    trials: int
    stderr: float
    privacy_error: float = 0.0
    privacy_stderr: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _estimate(name: str, d: SortedDataset, R: float, eps: float, gamma: float, rng: Rng) -> float:
    if name == "subset_optimal_mean":
        return subset_optimal_mean(d, SubsetMeanParams(R, eps, gamma), rng).estimate
    if name == "naive_laplace_range":
        return bounded_mean(d, BoundedMeanParams(Interval.symmetric(R), eps), rng)
    if name == "oracle_trimmed":
        k = inverse_epsilon_count(eps)
        v = d.values
        return float(np.mean(v[k: len(v) - k])) if len(v) > 2 * k else d.mean()
    raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")


def _data_gen(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def _run_cell(args):
    dist, n, ei, eps, estimators, trials, seed, gamma = args
    mu = dist.mean()
    root = Rng(seed)
    err = np.empty((len(estimators), trials))
    perr = np.empty_like(err)
    for t in range(trials):
        d = SortedDataset(dist.sample(n, _data_gen(seed, t)))
        m = d.mean()
        for k, name in enumerate(estimators):
            est = _estimate(name, d, dist.clip_R, eps, gamma, root.spawn(n, ei, k, t))
            err[k, t] = abs(est - mu)
            perr[k, t] = abs(est - m)
    out = []
    for k, name in enumerate(estimators):
        sd = err[k].std(ddof=1) if trials > 1 else 0.0
        psd = perr[k].std(ddof=1) if trials > 1 else 0.0
        out.append(TrialResult(n, eps, name, float(err[k].mean()), trials, float(sd / math.sqrt(trials)),
                               float(perr[k].mean()), float(psd / math.sqrt(trials))))
    return out


def run_experiment(dist: DistSpec, n_list: Sequence[int], eps_list: Sequence[float],
                   estimators: Sequence[str] = ESTIMATORS, trials: int = 200, seed: int = 0,
                   gamma: float = 1.0, workers: int = 1) -> list:
    """Monte Carlo mean absolute error for every (n, epsilon, estimator) cell.

    Results are in (n, epsilon, estimator) order and depend only on the
    arguments, not on ``workers``.
    """
    for name in estimators:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    if trials < 1:
        raise ValueError("trials must be positive")
    cells = [(dist, int(n), ei, float(eps), tuple(estimators), trials, seed, gamma)
             for n in n_list for ei, eps in enumerate(eps_list)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_cell, cells))
    else:
        parts = [_run_cell(c) for c in cells]
    return [r for part in parts for r in part]


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise ValueError("need at least two matching points to fit a slope")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fitted_slopes(results: Sequence[TrialResult]) -> list:
    """Slope of error vs n per (estimator, epsilon), and of privacy error vs
    n*epsilon per (estimator, n), wherever at least two cells exist."""
    out = []
    names = list(dict.fromkeys(r.estimator_name for r in results))
    for name in names:
        rs = [r for r in results if r.estimator_name == name]
        for eps in sorted({r.epsilon for r in rs}):
            cell = sorted((r for r in rs if r.epsilon == eps), key=lambda r: r.n)
            ys = [r.mean_abs_error for r in cell]
            if len(cell) >= 2 and min(ys) > 0:
                out.append({"estimator": name, "x": "n", "y": "mean_abs_error", "epsilon": eps,
                            "slope": fit_slope([r.n for r in cell], ys)})
        for n in sorted({r.n for r in rs}):
            cell = sorted((r for r in rs if r.n == n), key=lambda r: r.epsilon)
            ys = [r.privacy_error for r in cell]
            if len(cell) >= 2 and min(ys) > 0:
                out.append({"estimator": name, "x": "n*epsilon", "y": "privacy_error", "n": n,
                            "slope": fit_slope([r.n * r.epsilon for r in cell], ys)})
    return out


def empirical_moment(samples, k: float, about: str = "sample_mean") -> float:
    """Plug-in central absolute moment (1/n) sum |x - mean|^k."""
    if k < 1:
        raise ValueError("moment order must be at least 1")
    if about != "sample_mean":
        raise ValueError("only moments about the sample mean are supported")
    x = np.asarray(samples, dtype=float)
    return float(np.mean(np.abs(x - x.mean()) ** k))


def trimmed_gap_vs_moment_check(samples, epsilon: float, k: float) -> bool:
    """Whether trimming ceil(1/eps) points from either end moves the mean by at
    most 4 * M_k^(1/k) / (n eps')^(1 - 1/k), with eps' = 1/ceil(1/eps)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    m = inverse_epsilon_count(epsilon)
    if n <= 2 * m:
        raise ValueError(f"need n > 2*ceil(1/eps) = {2 * m}, got {n}")
    d = SortedDataset._from_sorted(x)
    gap = abs(lower_trim(d, m).mean() - upper_trim(d, m).mean())
    bound = 4 * empirical_moment(x, k) ** (1 / k) / (n / m) ** (1 - 1 / k)
    return bool(gap <= bound + 1e-12 * (1 + np.max(np.abs(x))))


def lp_risk_comparison(n: int = 10_000, epsilon: float = 0.01, R: float = 1e3, p: float = 2.0) -> dict:
    """Compare risk notions for the l_p minimizer on n-1 zeros and a single one.

    ``R1`` allows edits anywhere in [0, R]; ``R2_tilde`` keeps the support of
    D; the subset notion only removes points. Each is evaluated at the
    witness dataset that realizes the lower bounds for the first two.
    """
    k = inverse_epsilon_count(epsilon)
    if n <= 2 * k:
        raise ValueError("need n > 2*ceil(1/eps)")
    d = SortedDataset(np.concatenate((np.zeros(n - 1), [1.0])))
    th = theta_lp(d, p)
    w1 = SortedDataset(np.concatenate((np.zeros(n - k), np.full(k, R))))
    w2 = SortedDataset(np.concatenate((np.zeros(n - k), np.ones(k))))
    r1 = abs(theta_lp(w1, p) - th)
    r2 = abs(theta_lp(w2, p) - th)
    subset_gap = theta_lp(lower_trim(d, k), p) - theta_lp(upper_trim(d, k), p)
    proxy = risk_proxy(d, epsilon)
    return {
        "n": n,
        "epsilon": epsilon,
        "R": R,
        "p": p,
        "theta": th,
        "R1": r1,
        "R2_tilde": r2,
        "subset_trim_gap": subset_gap,
        "risk_proxy": proxy,
        "ratio_R1_R2_tilde": r1 / r2,
        "ratio_R2_tilde_proxy": r2 / proxy,
        "ordering_holds": bool(r1 > r2 > proxy),
    }
