import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taustat import (
    DegenerateBias,
    DistanceBandSet,
    NoCrossings,
    NoInhibition,
    ProportionUsedWarning,
    RelatednessRule,
    RngPolicy,
    TauCurve,
    TooFewValues,
    areal_ratio,
    bca_ci,
    bimodality,
    calibrate_window,
    estimate_endpoint,
    estimate_inhibition_start,
    estimate_range,
    extract_crossings,
    first_down_crossing,
    percentile_ci,
    skew_summary,
    summarise_crossings,
)
from taustat.bootstrap import BootstrapRun
from taustat.oracle import oracle_bca, oracle_first_down_crossing, oracle_quantile
from taustat.synthetic import household_epidemic


def _curve(mids, values):
    return TauCurve(DistanceBandSet([(m - 0.5, m + 0.5) for m in mids]), values)


@pytest.mark.parametrize(
    "mids, values, expected",
    [
        ([30, 40], [1.2, 0.8], 35.0),
        ([7.5, 25.0], [5.0, 0.0], 21.5),
        ([10, 20, 30], [3.0, 1.0, 0.5], 20.0),
        ([10, 20, 30, 40], [2.0, 0.5, 2.0, 0.5], 10 + 10 / 1.5),
    ],
)
def test_endpoint(mids, values, expected):
    assert estimate_endpoint(_curve(mids, values)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "values, status", [([2.0, 2.0, 2.0], "never_crossed"), ([0.5, 2.0, 0.5], "started_below"), ([np.nan, 2.0, np.nan], "undefined")]
)
def test_non_crossing_status(values, status):
    assert first_down_crossing([1, 2, 3], values) == (None, status)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 4.0), min_size=2, max_size=15))
def test_crossing_matches_oracle(values):
    mids = np.arange(len(values)) * 2.0 + 5
    assert first_down_crossing(mids, values)[0] == pytest.approx(oracle_first_down_crossing(mids, values), rel=1e-12)


def _run(rows, bands=None):
    rows = np.asarray(rows, dtype=float)
    bands = bands or DistanceBandSet([(m - 0.5, m + 0.5) for m in range(1, rows.shape[1] + 1)])
    return BootstrapRun("mmpsb", bands, 10, rows, np.full(len(rows), 6), np.zeros(len(rows), bool))


def test_extract_crossings_tallies():
    sample = extract_crossings(_run([[2.0, 0.0, 0.0], [2.0, 2.0, 2.0], [0.5, 2.0, 0.0], [3.0, 1.0, 0.0]]))
    np.testing.assert_allclose(sample.values, [1.5, 2.0])
    assert sample.counts() == {"used": 2, "started_below": 1, "never_crossed": 1, "failed": 0, "total": 4}
    assert sample.proportion_used == 0.5
    with pytest.raises(NoCrossings):
        extract_crossings(_run([[2.0, 2.0]]))


def test_percentile_of_one_to_hundred():
    ci = percentile_ci(np.arange(1, 101), 0.95)
    assert ci.as_tuple() == pytest.approx((3.475, 97.525), abs=1e-12)
    assert ci.as_tuple() == pytest.approx((oracle_quantile(range(1, 101), 0.025), oracle_quantile(range(1, 101), 0.975)))


def test_percentile_constant_sample():
    assert percentile_ci([4.2] * 30).as_tuple() == (4.2, 4.2)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60),
    st.floats(0.1, 10.0),
    st.floats(-100.0, 100.0),
)
def test_percentile_affine_equivariance(sample, scale, shift):
    x = np.asarray(sample)
    lo, hi = percentile_ci(x).as_tuple()
    lo2, hi2 = percentile_ci(scale * x + shift).as_tuple()
    assert lo2 == pytest.approx(scale * lo + shift, abs=1e-8 * (1 + abs(scale * lo) + abs(shift)))
    assert hi2 == pytest.approx(scale * hi + shift, abs=1e-8 * (1 + abs(scale * hi) + abs(shift)))


@pytest.mark.parametrize("seed", range(5))
def test_bca_matches_textbook_implementation(seed):
    x = np.random.default_rng(seed).gamma(2.0, 3.0, size=100)
    theta = float(np.median(x)) - 0.7
    got = bca_ci(x, theta, 0.95).as_tuple()
    np.testing.assert_allclose(got, oracle_bca(x, theta, 0.95), rtol=0, atol=1e-9)


def test_bca_frozen_value():
    # skewed fixed sample; reference interval from the pure-Python implementation
    x = np.arange(1, 101, dtype=float) ** 1.5
    lo, hi = oracle_bca(x, 480.0, 0.9)
    assert bca_ci(x, 480.0, 0.9).as_tuple() == pytest.approx((lo, hi), abs=1e-9)


@pytest.mark.parametrize("half", [20, 50, 200])
def test_bca_equals_percentile_on_symmetric_sample(half):
    d = np.random.default_rng(half).uniform(0.1, 5.0, half)
    x = np.concatenate([30 - d, 30 + d])
    np.testing.assert_allclose(bca_ci(x, 30.0).as_tuple(), percentile_ci(x).as_tuple(), rtol=1e-12)


def test_bca_one_sided_sample_falls_back():
    x = np.linspace(10, 20, 50)
    with pytest.warns(DegenerateBias):
        ci = bca_ci(x, 5.0)
    assert ci.fallback and ci.as_tuple() == percentile_ci(x).as_tuple()


def test_bca_needs_enough_values():
    with pytest.raises(TooFewValues):
        bca_ci(np.arange(10.0), 4.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interval_brackets_median(seed):
    x = np.random.default_rng(seed).normal(40, 8, 300)
    for ci in (percentile_ci(x), bca_ci(x, float(np.mean(x)))):
        assert ci.low <= np.median(x) <= ci.high


def test_inhibition_start_on_plain_curve():
    assert estimate_inhibition_start(_curve([10, 20, 30], [2.0, 1.5, 0.5])) == pytest.approx(25.0)
    with pytest.raises(NoInhibition):
        estimate_inhibition_start(_curve([10, 20, 30], [2.0, 1.5, 1.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 3.0), min_size=3, max_size=12))
def test_inhibition_start_matches_reflected_endpoint(values):
    # a curve that starts above 1 enters inhibition where it first falls through 1
    values = [2.5] + values
    mids = np.arange(len(values)) * 3.0 + 1.5
    expected = oracle_first_down_crossing(mids, values)
    if expected is None or min(values) >= 1.0:
        return
    if any(v == 1.0 for v in values):
        return
    assert estimate_inhibition_start(_curve(mids, values)) == pytest.approx(expected, rel=1e-12)


def test_areal_ratio():
    assert areal_ratio(1.2 * 36.0, 36.0) == pytest.approx(1.44, rel=1e-15)
    assert areal_ratio(1.2, 1.0) == pytest.approx(1.44, rel=1e-15)


def test_skew_direction():
    assert skew_summary([1, 2, 3, 10])["skew_direction"] == "positive"
    neg = skew_summary([-10, 1, 2, 3], 2.0)
    assert neg["skew_direction"] == "negative"
    assert neg["median_minus_point"] == -0.5


def test_bimodality_detection():
    gen = np.random.default_rng(0)
    assert bimodality(np.r_[gen.normal(20, 2, 600), gen.normal(40, 2, 400)])["bimodal"]
    assert not bimodality(gen.normal(30, 5, 1000))["bimodal"]
    assert not bimodality(np.full(20, 3.0))["bimodal"]


def test_proportion_used_warning():
    rows = [[3.0, 2.0 - 0.01 * k, 0.2] for k in range(25)] + [[0.5, 0.5, 0.5]] * 5
    with pytest.warns(ProportionUsedWarning):
        est = summarise_crossings(2.0, _run(rows), "percentile")
    assert est.proportion_used == pytest.approx(25 / 30)
    assert any("cross" in w for w in est.warnings)


@pytest.fixture(scope="module")
def village():
    return household_epidemic(seed=0)


@pytest.mark.parametrize("method", ["mmpsb", "risb"])
def test_estimate_range_on_synthetic_outbreak(village, method):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est, run, curve = estimate_range(
            village, RelatednessRule(7, 14), DistanceBandSet.overlapping(), method, 300, RngPolicy(0)
        )
    assert est.d_hat == pytest.approx(estimate_endpoint(curve))
    assert est.ci.low < est.d_hat < est.ci.high
    assert run.N == 300 and est.counts["total"] == 300


def test_calibrate_window_recovers_known_window(village):
    bands = DistanceBandSet.overlapping()
    from taustat import band_counts, build_pair_table, tau_odds

    rule = RelatednessRule(7, 14)
    target = estimate_endpoint(tau_odds(band_counts(build_pair_table(village, rule), bands), bands))
    rows = calibrate_window(village, bands, target, t_max=14, directional=(True,))
    assert abs(rows[0][1] - target) < 1e-12
    assert any(r == rule for r, _ in rows if abs(_ - target) < 1e-12)
