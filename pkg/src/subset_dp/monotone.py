"""Monotone-property estimation: the threshold-prune-then-inverse-sensitivity
pipeline, plus property bundles for means, quantiles and l_p minimizers.

Throughout, "theta(D') = t" on a grid of step beta means
``|theta(D') - t| <= beta/2``, so the grid point nearest to theta(D) always
has edit length zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dataset import Grid, Interval, SortedDataset, round_half_away
from .noise import Rng
from .report import EstimateReport, Stage
from .threshold import private_threshold_grid

# relative slack on the beta/2 hit window, absorbs float error in theta
HIT_SLACK = 1e-9


class PipelineError(RuntimeError):
    """A randomized stage produced an unusable intermediate (e.g. empty pruned set)."""


def hit_tolerance(beta: float) -> float:
    return beta / 2 + HIT_SLACK * beta


# ---------------------------------------------------------------- properties

def theta_mean(d: SortedDataset) -> float:
    return d.mean()


def quantile_index(n: int, q: float) -> int:
    """1-based order statistic used as the level-q quantile of n points."""
    return max(1, math.ceil(q * n - 1e-9))


def theta_quantile(d: SortedDataset, q: float) -> float:
    """Lower endpoint of the rank-ceil(qn) threshold interval, i.e. x_(ceil(qn))."""
    if not len(d):
        raise ValueError("quantile of an empty dataset")
    return float(d.values[quantile_index(len(d), q) - 1])


def _lp_grad(v: np.ndarray, y: float, p: float) -> float:
    z = y - v
    return float(np.sum(np.sign(z) * np.abs(z) ** (p - 1)))


def theta_lp(d: SortedDataset, p: float) -> float:
    """Minimizer of sum |x - y|^p, by bisection on the sign of the derivative."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    v = d.values
    if not v.size:
        raise ValueError("l_p minimizer of an empty dataset")
    lo, hi = float(v[0]), float(v[-1])
    tol = 1e-12 * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _lp_grad(v, mid, p) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------- len: quantile

def _lattice(x, step: float, what: str) -> np.ndarray:
    k = np.asarray(round_half_away(np.asarray(x, dtype=float) / step), dtype=np.int64)
    if np.any(np.abs(k * step - np.asarray(x)) > 1e-9 * step):
        raise ValueError(f"{what} must lie on multiples of {step}")
    return k


def _quantile_len_classes(n, q, a, s, can_below, can_above, cap):
    """Vectorized exact edit length given class counts per target.

    ``a`` counts points strictly below the hit window, ``s`` those at or
    below it. An edit changes the below/at/above counts by (u, v-u, w-v);
    the cost is the L1 norm of that change. For each total change ``w`` the
    constraints on (u, v) form a box, and the convex piecewise-linear cost
    attains its minimum at one of a handful of vertices.
    """
    a = np.asarray(a, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    best = np.full(a.shape, cap, dtype=np.int64)
    # cost is at least |w|, so stop once |w| reaches every current best
    for mag in range(0, cap):
        if not best.size or mag >= best.max():
            break
        for w in ((0,) if mag == 0 else (mag, -mag)):
            if n + w >= 1:
                _quantile_len_step(n, q, w, a, s, can_below, can_above, best)
    return best


def _quantile_len_step(n, q, w, a, s, can_below, can_above, best):
    act = np.flatnonzero(best > abs(w))
    if act.size:
        aa, ss = a[act], s[act]
        kk = quantile_index(n + w, q)
        ulo = -aa
        uhi = kk - 1 - aa
        uhi = np.where(can_below[act], uhi, np.minimum(uhi, 0))
        vlo = kk - ss
        vlo = np.where(can_above[act], vlo, np.maximum(vlo, w))
        vhi = n + w - ss

        def cu(x):
            return np.clip(x, ulo, uhi)

        def cv(x):
            return np.clip(x, vlo, vhi)

        def cost(u, v):
            return np.abs(u) + np.abs(v - u) + np.abs(w - v)

        us = [ulo, uhi, cu(0)]
        vs = [vlo, vhi, cv(0), cv(w)]
        c = best[act].copy()
        for u in us:
            for v in vs:
                c = np.minimum(c, cost(u, v))
            c = np.minimum(c, cost(u, cv(u)))
        for v in vs:
            c = np.minimum(c, cost(cu(v), v))
        best[act] = np.minimum(best[act], c)


def _quantile_len_many(d: SortedDataset, ts: np.ndarray, q: float, grid: Grid) -> np.ndarray:
    v = d.values
    n = v.size
    ts = np.asarray(ts, dtype=float)
    tol = hit_tolerance(grid.step)
    a = np.searchsorted(v, ts - tol, side="left")
    s = np.searchsorted(v, ts + tol, side="right")
    can_below = grid.start < ts - tol
    can_above = grid.stop > ts + tol
    # targets sharing class counts share a length
    key = np.stack([a, s, can_below, can_above], axis=1).astype(np.int64)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    lens = _quantile_len_classes(n, q, uniq[:, 0], uniq[:, 1],
                                 uniq[:, 2].astype(bool), uniq[:, 3].astype(bool), n)
    return lens[inv.ravel()]


def len_theta_quantile(d: SortedDataset, t: float, q: float, grid: Grid) -> int:
    """Fewest add/remove edits (additions drawn from ``grid``) after which the
    level-q quantile lies within beta/2 of ``t``. Capped at |D|."""
    if not len(d):
        raise ValueError("dataset must be nonempty")
    return int(_quantile_len_many(d, np.array([t]), q, grid)[0])


# ----------------------------------------------------------------- len: mean

class _MeanLenSolver:
    """Exact edit length for the mean on the beta-lattice, in integer units.

    With ``k`` removals and ``j >= 1`` additions the reachable sums form one
    contiguous integer range: swapping one removed point for its sorted
    neighbour moves the removed sum by at most the data span, never more than
    the width of the addition range. Removal-only edits can leave gaps, which
    are closed with an exact cardinality-constrained subset-sum when the
    target window is narrower than the largest adjacent data gap.
    """

    def __init__(self, d: SortedDataset, domain: Interval, beta: float):
        if not len(d):
            raise ValueError("dataset must be nonempty")
        slack = HIT_SLACK * beta
        if not d.within(Interval(domain.lo - slack, domain.hi + slack)):
            raise ValueError("dataset must lie inside the domain")
        g = Grid.multiples_in(domain, beta)
        self.beta = beta
        self.gmin = int(round(g.start / beta))
        self.gmax = self.gmin + g.count - 1
        self.x = _lattice(d.values, beta, "data")
        self.n = n = self.x.size
        self.S = int(self.x.sum())
        csum = np.concatenate(([0], np.cumsum(self.x)))
        k = np.arange(n + 1)
        rmin = csum[k]
        rmax = csum[n] - csum[n - k]
        self.A = self.S - rmax  # smallest sum left after k removals
        self.B = self.S - rmin
        self.m = n - k
        self.maxgap = int(np.max(np.diff(self.x))) if n > 1 else 0
        self._dp: Optional[list] = None

    def _min_j(self, c, s, m):
        # least j >= 1 with c + s*j + floor((m+j)/2) >= 0; the left side is nondecreasing in j
        j = np.maximum(1, -((2 * c + m) // (2 * s + 1)))
        ok = c + s * j + (m + j) // 2 >= 0
        return np.where(ok, j, j + 1)

    def _subset_sum_hits(self, k: int, lo: int, hi: int) -> bool:
        if self._dp is None:
            base = int(self.x[0])
            dp = [1] + [0] * self.n
            for i, xi in enumerate(self.x):
                sh = int(xi) - base
                for c in range(i + 1, 0, -1):
                    dp[c] |= dp[c - 1] << sh
            self._dp = (base, dp)
        base, dp = self._dp
        lo -= k * base
        hi -= k * base
        if hi < 0:
            return False
        lo = max(lo, 0)
        return bool((dp[k] >> lo) & ((1 << (hi - lo + 1)) - 1))

    def lens(self, ts) -> np.ndarray:
        T = _lattice(ts, self.beta, "targets")
        if np.any((T < self.gmin) | (T > self.gmax)):
            raise ValueError("targets must lie inside the domain")
        n = self.n
        out = np.empty(T.size, dtype=np.int64)
        A, B, m = self.A, self.B, self.m
        k = np.arange(n + 1)
        for idx, t in enumerate(T.tolist()):
            j1 = self._min_j(B - t * m, self.gmax - t, m)
            j2 = self._min_j(t * m - A, t - self.gmin, m)
            best = int(np.min(k + np.maximum(j1, j2)))
            # removal-only edits (j = 0), keeping at least one point
            h = m // 2
            wlo = t * m - h
            whi = t * m + h
            cand = np.flatnonzero((k < n) & (k < best) & (wlo <= B) & (whi >= A))
            for kk in cand.tolist():
                if A[kk] == B[kk] or 2 * h[kk] + 1 >= self.maxgap:
                    best = kk
                    break
                # window on the removed sum: S - whi .. S - wlo
                if self._subset_sum_hits(kk, self.S - int(whi[kk]), self.S - int(wlo[kk])):
                    best = kk
                    break
            out[idx] = min(best, n)
        return out


def len_theta_mean(d: SortedDataset, t: float, domain: Interval, beta: float) -> int:
    """Fewest edits (additions on multiples of beta in ``domain``) after which
    the mean lies within beta/2 of ``t``. Data and ``t`` must lie on multiples
    of beta. Capped at |D|."""
    return int(_MeanLenSolver(d, domain, beta).lens(np.array([t]))[0])


# ------------------------------------------------------------------- len: l_p

def _lp_push_count(v: np.ndarray, y: float, top: float, p: float) -> int:
    """Fewest extreme edits (drop smallest points, add copies of ``top``)
    that bring the l_p minimizer up to at least ``y``."""
    n = v.size
    z = y - v
    gains = np.sign(z) * np.abs(z) ** (p - 1)  # removal gain, nonincreasing
    need = float(gains.sum())
    if need <= 0:
        return 0
    c = (top - y) ** (p - 1)
    prefix = np.concatenate(([0.0], np.cumsum(gains)))
    i = np.arange(n + 1)
    rest = need - prefix
    # ties at the window edge: residuals at rounding level count as reached
    rest[np.abs(rest) <= 1e-12 * float(np.abs(gains).sum())] = 0.0
    j = np.where(rest > 0, np.ceil(rest / c), 0.0) if c > 0 else np.where(rest > 0, np.inf, 0.0)
    j[n] = max(j[n], 1.0)
    return int(min(np.min(i + j), n))


def len_theta_lp_relaxed(d: SortedDataset, t: float, p: float, grid: Grid) -> int:
    """Smallest k for which some extreme k-edit moves the l_p minimizer
    within beta/2 of ``t``.

    This is a lower bound on the true edit length with the same
    sensitivity (at most one between neighbours), which keeps the inverse
    sensitivity mechanism private; points with length at most k still lie
    within the k-edit modulus of theta(D).
    """
    tol = hit_tolerance(grid.step)
    th = theta_lp(d, p)
    if abs(th - t) <= tol:
        return 0
    v = d.values
    if t > th:
        return _lp_push_count(v, t - tol, grid.stop, p)
    return _lp_push_count(-v[::-1], -(t + tol), -grid.start, p)


# --------------------------------------------------------------- spec bundle

@dataclass(frozen=True)
class PropertySpec:
    name: str
    theta: Callable[[SortedDataset], float]
    len_theta: Callable[[SortedDataset, float, Grid], int]
    lipschitz_L: float = 1.0
    bound_B: Optional[float] = None  # None means 2R
    monotone_direction: str = "increasing"
    len_many: Optional[Callable[[SortedDataset, Grid], np.ndarray]] = field(default=None, compare=False)

    def len_profile(self, d: SortedDataset, grid: Grid) -> "LenProfile":
        if self.len_many is not None:
            lens = np.asarray(self.len_many(d, grid), dtype=np.int64)
        else:
            lens = np.array([self.len_theta(d, float(t), grid) for t in grid.values()], dtype=np.int64)
        return LenProfile(grid.values(), lens)


@dataclass(frozen=True, eq=False)
class LenProfile:
    grid: np.ndarray
    lens: np.ndarray


def mean_spec() -> PropertySpec:
    def len_theta(d, t, grid):
        return len_theta_mean(d, t, Interval(grid.start, grid.stop), grid.step)

    def len_many(d, grid):
        return _MeanLenSolver(d, Interval(grid.start, grid.stop), grid.step).lens(grid.values())

    return PropertySpec("mean", theta_mean, len_theta, len_many=len_many)


def quantile_spec(q: float, name: Optional[str] = None) -> PropertySpec:
    if not 0 < q <= 1:
        raise ValueError("quantile level must lie in (0, 1]")

    def theta(d):
        return theta_quantile(d, q)

    def len_theta(d, t, grid):
        return len_theta_quantile(d, t, q, grid)

    def len_many(d, grid):
        return _quantile_len_many(d, grid.values(), q, grid)

    return PropertySpec(name or f"quantile:{q!r}", theta, len_theta, len_many=len_many)


def median_spec() -> PropertySpec:
    return quantile_spec(0.5, "median")


def lp_spec(p: float) -> PropertySpec:
    if p <= 1:
        raise ValueError("p must exceed 1")

    def theta(d):
        return theta_lp(d, p)

    def len_theta(d, t, grid):
        return len_theta_lp_relaxed(d, t, p, grid)

    return PropertySpec(f"lp:{p!r}", theta, len_theta)


def parse_property(text: str) -> PropertySpec:
    """``mean``, ``median``, ``quantile:Q`` or ``lp:P``."""
    name, _, arg = text.partition(":")
    try:
        if name == "mean" and not arg:
            return mean_spec()
        if name == "median" and not arg:
            return median_spec()
        if name == "quantile" and arg:
            return quantile_spec(float(arg))
        if name == "lp" and arg:
            return lp_spec(float(arg))
    except ValueError as exc:
        raise ValueError(f"bad property {text!r}: {exc}") from None
    raise ValueError(f"unknown property {text!r}; expected mean, median, quantile:Q or lp:P")


# ------------------------------------------------------- inverse sensitivity

def inverse_sensitivity_distribution(d: SortedDataset, grid: Grid, epsilon: float, spec: PropertySpec):
    """Grid values and their exact output probabilities."""
    if not len(d):
        raise ValueError("inverse sensitivity needs a nonempty dataset")
    prof = spec.len_profile(d, grid)
    logw = -0.5 * epsilon * prof.lens.astype(float)
    logw -= logw.max()
    w = np.exp(logw)
    return prof.grid, w / w.sum(), prof


def inverse_sensitivity(d: SortedDataset, range: Interval, beta: float, epsilon: float,
                        spec: PropertySpec, rng: Rng) -> float:
    """Draw a multiple of beta in ``range`` with weight exp(-(eps/2) len(D, t))."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = Grid.multiples_in(range, beta)
    vals, probs, _ = inverse_sensitivity_distribution(d, grid, epsilon, spec)
    if rng.deterministic:
        return float(vals[int(np.argmax(probs))])
    cum = np.cumsum(probs)
    i = int(np.searchsorted(cum, rng.uniform() * cum[-1], side="right"))
    return float(vals[min(i, vals.size - 1)])


# ------------------------------------------------------------------ pipeline

@dataclass(frozen=True)
class MonotoneParams:
    R: float
    epsilon: float
    beta: float

    def __post_init__(self):
        if self.R <= 0 or self.epsilon <= 0 or self.beta <= 0:
            raise ValueError("R, epsilon and beta must be positive")

    def derive(self, L: float = 1.0, B: Optional[float] = None) -> dict:
        """Run-time constants. ``epsilon`` is the benchmark level; stages run
        at ``c_eps * epsilon`` in total."""
        B = 2 * self.R if B is None else B
        arg = 6 * self.R * B / (L * self.beta**2)
        if arg <= 1:
            raise ValueError("beta too coarse: 6RB/(L beta^2) must exceed 1")
        c_eps = 128 * math.log(arg)
        eps_run = c_eps * self.epsilon
        eta = L * self.beta / B
        r_raw = 32 * math.log(6 * self.R / (eta * self.beta)) / eps_run
        r = 4 * max(1, math.ceil(r_raw / 4 - 1e-12))
        return {"B": B, "c_eps": c_eps, "eps_run": eps_run, "eta": eta, "r": r, "r_raw": r_raw}


def estimate_monotone(d: SortedDataset, mp: MonotoneParams, spec: PropertySpec, rng: Rng) -> EstimateReport:
    """Private estimate of a monotone property with subset-optimal error.

    Quantize to multiples of beta, locate private low/high cut points on
    that grid, push the 3r/2 most extreme points outward by beta, keep what
    lies between the cuts and finish with the inverse sensitivity mechanism.
    """
    dom = Interval.symmetric(mp.R)
    if not len(d) or not d.within(dom):
        raise ValueError(f"dataset must be nonempty and inside [-{mp.R}, {mp.R}]")
    c = mp.derive(spec.lipschitz_L, spec.bound_B)
    n = len(d)
    r = c["r"]
    if n <= 4 * r:
        raise ValueError(f"dataset too small: need |D| > 4r = {4 * r}, got {n}")
    beta = mp.beta
    M = int(round_half_away(np.array(mp.R / beta)))
    grid = Grid(-M * beta, beta, 2 * M + 1)
    q = np.asarray(round_half_away(d.values / beta), dtype=np.int64)
    quant = SortedDataset._from_sorted(q * beta)
    eps_stage = c["eps_run"] / 4
    l = private_threshold_grid(quant, grid, r // 4, eps_stage, rng)
    u = private_threshold_grid(quant, grid, n - r // 4, eps_stage, rng)
    li, ui = int(round(l / beta)), int(round(u / beta))
    if li > ui:
        li, ui = ui, li
    h = math.ceil(3 * r / 2)
    y = q.copy()
    y[:h] -= 1
    y[n - h:] += 1
    kept = y[(y >= li) & (y <= ui)]
    transcript = {
        "r": r,
        "l": li * beta,
        "u": ui * beta,
        "quantized": q * beta,
        "shifted": y * beta,
        "pruned": kept * beta,
    }
    if not kept.size:
        raise PipelineError(f"no points left between the private cut points [{li * beta}, {ui * beta}]")
    pruned = SortedDataset._from_sorted(kept * beta)
    eps_inv = c["eps_run"] / 2
    est = inverse_sensitivity(pruned, Interval(li * beta, ui * beta), beta, eps_inv, spec, rng)
    return EstimateReport(
        estimate=est,
        epsilon_total=c["eps_run"],
        stages=[
            Stage("lower_threshold", eps_stage, li * beta),
            Stage("upper_threshold", eps_stage, ui * beta),
            Stage("inverse_sensitivity", eps_inv, est),
        ],
        params={
            "property": spec.name,
            "R": mp.R,
            "epsilon": mp.epsilon,
            "beta": beta,
            "n": n,
            "c_eps": c["c_eps"],
            "eps_run": c["eps_run"],
            "eta": c["eta"],
            "r": r,
        },
        seed=getattr(rng, "seed", None),
        transcript=transcript,
    )


# --------------------------------------------------------------------- omega

def omega(d: SortedDataset, k: int, spec: PropertySpec, grid: Grid) -> float:
    """Largest |theta(D') - theta(D)| over D' within k edits (additions on ``grid``).

    For a monotone property the extremes come from dropping the largest
    points and adding copies of the grid minimum, or the mirror image.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    v = d.values
    n = v.size
    th = spec.theta(d)
    best = 0.0
    for i in range(0, min(k, n) + 1):
        for j in range(0, k - i + 1):
            if n - i + j < 1:
                continue
            down = np.concatenate((np.full(j, grid.start), v[: n - i]))
            up = np.concatenate((v[i:], np.full(j, grid.stop)))
            for arr in (down, up):
                ds = SortedDataset._from_sorted(np.sort(arr))
                best = max(best, abs(spec.theta(ds) - th))
    return best
