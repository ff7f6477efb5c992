import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subset_dp.dataset import Grid, Interval, SortedDataset, dominates, lower_trim, upper_trim
from subset_dp.monotone import (
    MonotoneParams,
    PropertySpec,
    estimate_monotone,
    inverse_sensitivity,
    inverse_sensitivity_distribution,
    len_theta_mean,
    len_theta_quantile,
    lp_spec,
    mean_spec,
    median_spec,
    omega,
    parse_property,
    quantile_index,
    quantile_spec,
    theta_lp,
    theta_quantile,
)
from subset_dp.noise import Rng, ZeroNoiseRng
from subset_dp.oracles import bfs_len_theta

values = st.lists(st.integers(-20, 20), min_size=1, max_size=15).map(lambda v: [x / 4 for x in v])


# ---------------------------------------------------------------- theta_lp

def test_lp_closed_form():
    d = SortedDataset([0.0] * 9 + [1.0])
    assert theta_lp(d, 3.0) == pytest.approx(0.25, abs=1e-10)


def test_lp2_is_mean_and_symmetric_center():
    gen = np.random.default_rng(0)
    x = gen.normal(0, 1, 50)
    assert theta_lp(SortedDataset(x), 2.0) == pytest.approx(x.mean(), abs=1e-9)
    half = gen.uniform(0, 1, 20)
    sym = SortedDataset(np.concatenate((3 + half, 3 - half)))
    assert theta_lp(sym, 1.5) == pytest.approx(3.0, abs=1e-9)


@settings(max_examples=200)
@given(values, st.sampled_from([1.5, 2.0, 3.0, 4.5]))
def test_lp_stationarity(xs, p):
    v = np.array(xs)
    y = theta_lp(SortedDataset(xs), p)
    z = y - v
    g = np.sum(p * np.sign(z) * np.abs(z) ** (p - 1))
    scale = np.sum(np.abs(z) ** (p - 1))
    assert abs(g) <= 1e-8 * scale + 1e-300


# ------------------------------------------------------------ monotonicity

SPECS = [mean_spec(), median_spec(), quantile_spec(0.1), quantile_spec(0.9), lp_spec(1.5), lp_spec(3.0)]


@settings(max_examples=1000)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(0, 8)), min_size=1, max_size=12))
def test_specs_are_monotone(pairs):
    low = SortedDataset([a / 4 for a, _ in pairs])
    high = SortedDataset(low.values + np.sort([b / 4 for _, b in pairs]))
    assert dominates(high, low)
    for spec in SPECS:
        assert spec.theta(high) >= spec.theta(low) - 1e-9


@settings(max_examples=100)
@given(values)
def test_theta_in_data_range(xs):
    d = SortedDataset(xs)
    for spec in SPECS:
        assert d.values[0] - 1e-12 <= spec.theta(d) <= d.values[-1] + 1e-12


def test_quantile_convention():
    d = SortedDataset([1, 2, 3, 4])
    assert theta_quantile(d, 0.5) == 2
    assert theta_quantile(d, 0.01) == 1
    assert theta_quantile(d, 1.0) == 4


# ---------------------------------------------------------------- lengths

def test_len_quantile_examples():
    g = Grid(0.0, 1.0, 5)
    d = SortedDataset([1.0, 2.0, 3.0])
    assert len_theta_quantile(d, 2.0, 0.5, g) == 0
    # oracle value under the lower-median convention
    assert bfs_len_theta(d, 3.0, median_spec(), g, 4) == 2
    assert len_theta_quantile(d, 3.0, 0.5, g) == 2


def test_len_mean_examples():
    d = SortedDataset([0.0] * 4)
    assert bfs_len_theta(d, 0.25, mean_spec(), Grid(0.0, 0.25, 5), 3) == 1
    assert len_theta_mean(d, 0.25, Interval(0, 1), 0.25) == 1
    assert len_theta_mean(d, 0.0, Interval(0, 1), 0.25) == 0
    # removal-only sums are not an interval here; the true length is 2
    assert len_theta_mean(SortedDataset([0.0, 1.0]), 0.1, Interval(0, 1), 0.1) == 2


def test_len_mean_cap():
    d = SortedDataset([0.0] * 3)
    assert len_theta_mean(d, 1.0, Interval(0, 1), 0.01) == 3


@pytest.mark.parametrize("spec", SPECS[:4], ids=lambda s: s.name)
def test_len_zero_at_rounded_theta(spec):
    gen = np.random.default_rng(1)
    g = Grid(-2.0, 0.25, 17)
    for _ in range(50):
        d = SortedDataset(gen.integers(-8, 9, int(gen.integers(1, 10))) * 0.25)
        prof = spec.len_profile(d, g)
        i = int(np.argmin(np.abs(prof.grid - spec.theta(d))))
        assert prof.lens[i] == 0
        assert np.all(prof.lens >= 0) and np.all(prof.lens <= len(d))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_len_sensitivity(spec):
    gen = np.random.default_rng(2)
    g = Grid(0.0, 0.25, 9)
    for _ in range(60):
        base = gen.integers(0, 9, int(gen.integers(1, 8))) * 0.25
        d1 = SortedDataset(base)
        d2 = SortedDataset(np.append(base, gen.integers(0, 9) * 0.25))
        l1 = spec.len_profile(d1, g).lens
        l2 = spec.len_profile(d2, g).lens
        # the cap at |D| can move by one as well
        assert np.max(np.abs(l1 - l2)) <= 1


# ------------------------------------------------------ inverse sensitivity

def _toy_spec():
    return PropertySpec("toy", lambda d: 0.0, lambda d, t, grid: 0 if t == 0 else 1)


def test_inverse_sensitivity_single_point():
    d = SortedDataset([0.3])
    out = {inverse_sensitivity(d, Interval(0.2, 0.4), 0.3, 1.0, mean_spec(), Rng(s)) for s in range(20)}
    assert out == {0.3}


def test_inverse_sensitivity_two_points():
    d = SortedDataset([0.0])
    spec = _toy_spec()
    vals, probs, _ = inverse_sensitivity_distribution(d, Grid(0.0, 1.0, 2), 2.0, spec)
    expected = math.exp(-1) / (1 + math.exp(-1))
    assert probs[1] == pytest.approx(expected)
    root = Rng(3)
    draws = np.array([inverse_sensitivity(d, Interval(0, 1), 1.0, 2.0, spec, root.spawn(i)) for i in range(10**5)])
    assert np.mean(draws == 1.0) == pytest.approx(expected, rel=0.01)


def test_inverse_sensitivity_zero_noise_mode():
    d = SortedDataset([0.1, 0.2, 0.7])
    assert inverse_sensitivity(d, Interval(0, 1), 0.1, 1.0, median_spec(), ZeroNoiseRng()) == pytest.approx(0.2)


def test_inverse_sensitivity_rejects_empty():
    with pytest.raises(ValueError):
        inverse_sensitivity(SortedDataset([]), Interval(0, 1), 0.1, 1.0, mean_spec(), Rng(0))


# ---------------------------------------------------------------- pipeline

def test_derive_constants():
    c = MonotoneParams(1.0, 0.02, 0.01).derive()
    assert c["B"] == 2.0
    assert c["c_eps"] == pytest.approx(128 * math.log(6 * 2 / 1e-4))
    assert c["eta"] == pytest.approx(0.005)
    assert c["r_raw"] == pytest.approx(32 * math.log(6 / (0.005 * 0.01)) / c["eps_run"])
    assert c["r"] % 4 == 0 and c["r"] >= c["r_raw"]


def test_zero_noise_median_pipeline():
    # a block of ties around the median absorbs the uneven pruning at the ends
    gen = np.random.default_rng(4)
    d = SortedDataset(np.concatenate((gen.uniform(0, 0.45, 30), np.full(41, 0.5), gen.uniform(0.55, 1, 30))))
    mp = MonotoneParams(1.0, 0.02, 0.01)
    rep = estimate_monotone(d, mp, median_spec(), ZeroNoiseRng())
    assert rep.estimate == pytest.approx(0.5)
    assert rep.epsilon_total == pytest.approx(mp.derive()["eps_run"])
    assert sum(s.epsilon for s in rep.stages) == pytest.approx(rep.epsilon_total)


def test_zero_noise_median_uniform_is_median_of_kept_points():
    # uneven pruning at the two ends moves the kept median by about half the
    # difference in pruned counts; the output is the median of what is kept
    gen = np.random.default_rng(4)
    mp = MonotoneParams(1.0, 0.02, 0.01)
    for _ in range(20):
        d = SortedDataset(gen.uniform(0, 1, 101))
        rep = estimate_monotone(d, mp, median_spec(), ZeroNoiseRng())
        tr = rep.transcript
        kept = SortedDataset(tr["pruned"])
        assert rep.estimate == pytest.approx(theta_quantile(kept, 0.5), abs=1e-12)
        below = int(np.sum(tr["shifted"] < tr["l"] - 1e-12))
        above = int(np.sum(tr["shifted"] > tr["u"] + 1e-12))
        k = quantile_index(len(d), 0.5) - 1
        shift = quantile_index(len(kept), 0.5) - 1 + below - k
        q = np.round(d.values / 0.01) * 0.01
        assert rep.estimate == pytest.approx(q[k + shift], abs=1e-12)
        assert abs(shift) <= (abs(above - below) + 1) // 2 + 1


def test_pipeline_rejects_small_data():
    with pytest.raises(ValueError):
        estimate_monotone(SortedDataset([0.5] * 10), MonotoneParams(1.0, 0.02, 0.01), median_spec(), Rng(0))
    with pytest.raises(ValueError):
        estimate_monotone(SortedDataset([5.0] * 200), MonotoneParams(1.0, 0.02, 0.01), median_spec(), Rng(0))


@pytest.mark.parametrize("spec", [mean_spec(), median_spec(), lp_spec(2.0)], ids=lambda s: s.name)
def test_transcript_properties(spec):
    gen = np.random.default_rng(5)
    beta = 0.01
    mp = MonotoneParams(1.0, 0.02, beta)
    for trial in range(15):
        d = SortedDataset(np.clip(gen.normal(0.2, 0.3, 200), -1, 1))
        rep = estimate_monotone(d, mp, spec, Rng(trial))
        tr = rep.transcript
        r = tr["r"]
        q, y, kept = tr["quantized"], tr["shifted"], tr["pruned"]
        h = math.ceil(3 * r / 2)
        assert np.all(np.diff(y) >= -1e-12)
        diff = y - q
        assert np.allclose(diff[:h], -beta) and np.allclose(diff[-h:], beta)
        assert np.allclose(diff[h:-h], 0)
        assert np.sum(y < tr["l"] - 1e-12) <= 2 * r
        shifted = SortedDataset(y)
        pruned = SortedDataset(kept)
        assert dominates(lower_trim(shifted, 4 * r), pruned)
        assert dominates(pruned, upper_trim(shifted, 4 * r))
        assert tr["l"] <= rep.estimate <= tr["u"]


def _trim_risk(d, spec, eps):
    k = min(math.ceil(1 / eps), (len(d) - 1) // 2)
    return spec.theta(lower_trim(d, k)) - spec.theta(upper_trim(d, k))


def test_median_error_within_bound_with_outliers():
    gen = np.random.default_rng(6)
    d = SortedDataset(np.concatenate((gen.uniform(0, 1, 500), np.full(20, 100.0))))
    eps, beta = 0.005, 0.01
    spec = median_spec()
    mp = MonotoneParams(100.0, eps, beta)
    root = Rng(7)
    th = spec.theta(d)
    err = np.mean([abs(estimate_monotone(d, mp, spec, root.spawn(i)).estimate - th) for i in range(500)])
    assert err <= 2 * math.e**2 * _trim_risk(d, spec, eps) + 7 * beta


# ------------------------------------------------------------------- omega

def test_omega_examples():
    g = Grid(0.0, 0.5, 3)
    d = SortedDataset([0.0, 0.0])
    assert omega(d, 0, mean_spec(), g) == 0
    assert omega(d, 1, mean_spec(), g) == pytest.approx(1 / 3)


def test_parse_property():
    assert parse_property("mean").name == "mean"
    assert parse_property("median").name == "median"
    assert parse_property("quantile:0.25").theta(SortedDataset([1, 2, 3, 4])) == 1
    assert parse_property("lp:3").theta(SortedDataset([0.0] * 9 + [1.0])) == pytest.approx(0.25)
    for bad in ("mode", "quantile", "quantile:2", "lp:0.5", "mean:1"):
        with pytest.raises(ValueError):
            parse_property(bad)
