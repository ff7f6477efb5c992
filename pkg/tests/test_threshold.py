import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subset_dp.dataset import Grid, Interval, SortedDataset, rank_error
from subset_dp.noise import Rng, ZeroNoiseRng
from subset_dp.threshold import (
    ThresholdParams,
    beta_for,
    build_loss,
    grid_beta_for,
    is_approximate_threshold,
    private_threshold,
    private_threshold_grid,
    threshold_density,
    upper_rank_threshold,
)

UNIT = Interval(0, 1)


def test_single_point_loss():
    d = SortedDataset([0.5])
    loss = build_loss(d, ThresholdParams(UNIT, 1, 0.1, 1.0))
    assert loss.breakpoints.tolist() == pytest.approx([0.0, 0.4, 1.0])
    assert loss.levels.tolist() == [1, 0]
    assert loss.at([0.0, 0.39, 0.4, 0.7, 1.0]).tolist() == [1, 1, 0, 0, 0]


def test_single_point_probability():
    d = SortedDataset([0.5])
    p = ThresholdParams(UNIT, 1, 0.1, 2.0)
    expected = 0.6 / (0.6 + 0.4 * math.exp(-1))
    assert threshold_density(d, p).mass_above(0.4) == pytest.approx(expected)
    x = private_threshold(d, p, Rng(11), size=10**5)
    assert np.mean(x >= 0.4) == pytest.approx(expected, rel=0.01)


def test_upper_threshold_mirrors_single_point():
    d = SortedDataset([0.5])
    p = ThresholdParams(UNIT, 1, 0.1, 2.0)
    expected = 0.6 / (0.6 + 0.4 * math.exp(-1))
    x = upper_rank_threshold(d, p, Rng(12), size=10**5)
    assert np.mean(x <= 0.6) == pytest.approx(expected, rel=0.01)


def test_upper_threshold_is_negated_lower_on_mirror():
    d = SortedDataset([0.1, 0.3, 0.35, 0.8])
    p = ThresholdParams(UNIT, 2, 0.05, 1.0)
    a = upper_rank_threshold(d, p, Rng(4), size=50)
    m = ThresholdParams(Interval(-1, 0), 2, 0.05, 1.0)
    b = -private_threshold(d.negate(), m, Rng(4), size=50)
    assert np.array_equal(a, b)


def test_symmetric_data_mirrored_distributions():
    d = SortedDataset([0.2, 0.4, 0.6, 0.8])
    p = ThresholdParams(UNIT, 1, 0.05, 1.0)
    lo = private_threshold(d, p, Rng(1), size=10**5)
    hi = upper_rank_threshold(d, p, Rng(1), size=10**5)
    assert np.allclose(np.quantile(lo, [0.1, 0.5, 0.9]), 1 - np.quantile(hi, [0.9, 0.5, 0.1]), atol=0.01)


def test_flat_loss_gives_uniform():
    # every tau in [0, 1] is within alpha of a rank-1 threshold of {0.5}
    d = SortedDataset([0.5])
    p = ThresholdParams(UNIT, 1, 0.5, 1.0)
    assert build_loss(d, p).levels.tolist() == [0]
    x = private_threshold(d, p, Rng(2), size=10**5)
    assert abs(x.mean() - 0.5) < 0.01


def test_param_validation():
    with pytest.raises(ValueError):
        ThresholdParams(UNIT, 1, 0.6, 1.0)
    with pytest.raises(ValueError):
        ThresholdParams(UNIT, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        ThresholdParams(UNIT, 1, 0.1, 0.0)
    with pytest.raises(ValueError):
        build_loss(SortedDataset([0.5]), ThresholdParams(UNIT, 2, 0.1, 1.0))
    with pytest.raises(ValueError):
        build_loss(SortedDataset([1.5]), ThresholdParams(UNIT, 1, 0.1, 1.0))


def test_beta_formulas():
    assert beta_for(0.1, 1.0, 1.0, 0.05) == pytest.approx(2 * math.log(1 / (0.05 * 0.1)))
    assert grid_beta_for(0.1, 2.0, 11) == pytest.approx(math.log(330))


datasets = st.lists(st.integers(0, 40), min_size=1, max_size=15).map(lambda v: [x / 40 for x in v])


@settings(max_examples=150)
@given(datasets, st.data())
def test_loss_invariants(xs, data):
    d = SortedDataset(xs)
    r = data.draw(st.integers(1, len(d)))
    alpha = data.draw(st.sampled_from([0.01, 0.05, 0.2, 0.5]))
    loss = build_loss(d, ThresholdParams(UNIT, r, alpha, 1.0))
    assert np.all(loss.levels >= 0)
    assert loss.breakpoints.size <= 2 * len(d) + 2
    allowed = np.concatenate((d.values - alpha, d.values + alpha, [0.0, 1.0]))
    assert all(np.isclose(allowed, b).any() for b in loss.breakpoints)
    assert max(hi - lo for lo, hi in loss.zero_runs()) >= alpha - 1e-12


@settings(max_examples=150)
@given(datasets, st.integers(0, 40), st.data())
def test_loss_sensitivity(xs, extra, data):
    d1 = SortedDataset(xs)
    d2 = SortedDataset(xs + [extra / 40])
    r = data.draw(st.integers(1, len(d1)))
    alpha = data.draw(st.sampled_from([0.01, 0.05, 0.2]))
    l1 = build_loss(d1, ThresholdParams(UNIT, r, alpha, 1.0))
    l2 = build_loss(d2, ThresholdParams(UNIT, r, alpha, 1.0))
    cuts = np.union1d(l1.breakpoints, l2.breakpoints)
    pts = np.concatenate((cuts, 0.5 * (cuts[:-1] + cuts[1:])))
    assert np.max(np.abs(l1.at(pts) - l2.at(pts))) <= 1


def test_zero_loss_near_exact_threshold():
    gen = np.random.default_rng(0)
    for _ in range(50):
        d = SortedDataset(gen.uniform(0, 1, 20))
        r = int(gen.integers(1, 21))
        tau = d.values[r - 1]
        loss = build_loss(d, ThresholdParams(UNIT, r, 0.03, 1.0))
        shifts = np.linspace(-0.03, 0.03, 13)
        assert np.all(loss.at(np.clip(tau + shifts, 0, 1)) == 0)


def test_grid_single_point_concentrates():
    g = Grid(0.0, 0.1, 11)
    d = SortedDataset([0.3] * 5)
    out = private_threshold_grid(d, g, 3, 200.0, Rng(3), size=200)
    assert np.all(np.isclose(out, 0.3))


def test_grid_rejects_off_grid_data():
    with pytest.raises(ValueError):
        private_threshold_grid(SortedDataset([0.33]), Grid(0.0, 0.1, 11), 1, 1.0, Rng(0))


def test_grid_rounding_never_increases_rank_error():
    gen = np.random.default_rng(5)
    g = Grid(0.0, 0.1, 11)
    for _ in range(200):
        d = SortedDataset(np.round(gen.integers(0, 11, int(gen.integers(1, 15))) * 0.1, 12))
        r = int(gen.integers(1, len(d) + 1))
        tau = float(gen.uniform(0, 1))
        k = int(np.clip(np.rint(tau / 0.1), 0, 10))
        rounded = float(np.round(k * 0.1, 12))
        assert rank_error(rounded, r, d) <= rank_error(tau, r, d)


def test_grid_failure_rate():
    gen = np.random.default_rng(6)
    g = Grid(0.0, 0.05, 21)
    zeta, eps = 0.1, 1.0
    beta = grid_beta_for(zeta, eps, g.count)
    fails = total = 0
    for _ in range(10):
        d = SortedDataset(gen.integers(0, 21, 30) * 0.05)
        r = int(gen.integers(1, 31))
        out = private_threshold_grid(d, g, r, eps, Rng(int(gen.integers(1 << 30))), size=1000)
        fails += sum(not is_approximate_threshold(float(t), r, d, 0.0, beta) for t in out)
        total += out.size
    assert fails / total <= zeta


def test_zero_noise_threshold_is_mode():
    d = SortedDataset([0.1, 0.2, 0.3])
    p = ThresholdParams(UNIT, 2, 0.01, 1.0)
    tau = private_threshold(d, p, ZeroNoiseRng())
    assert build_loss(d, p).at(tau) == 0


def test_is_approximate_threshold():
    d = SortedDataset([0.1, 0.2, 0.3])
    assert is_approximate_threshold(0.2, 2, d, 0.0, 0)
    assert not is_approximate_threshold(0.9, 1, d, 0.1, 1)
    assert is_approximate_threshold(0.9, 1, d, 0.1, 2)
    assert is_approximate_threshold(0.25, 2, d, 0.05, 0)


def test_runtime_is_near_linearithmic():
    gen = np.random.default_rng(0)
    ns = [10**4, 10**5, 10**6]
    times = []
    for n in ns:
        d = SortedDataset(gen.uniform(0, 1, n))
        p = ThresholdParams(UNIT, n // 2, 1e-4, 1.0)
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            private_threshold(d, p, Rng(0))
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    work = np.array([n * math.log(n) for n in ns])
    slope = np.polyfit(np.log(work), np.log(times), 1)[0]
    assert slope <= 1.3
