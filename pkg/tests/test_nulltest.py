import math

import numpy as np
import pytest

from taustat import (
    CaseSet,
    DistanceBandSet,
    InsufficientSims,
    MismatchedBandSets,
    RelatednessRule,
    RngPolicy,
    TauCurve,
    band_counts,
    build_pair_table,
    envelope_test,
    erl_refinement,
    extreme_rank_envelope,
    null_matrix,
    permute_time_marks,
    pointwise_ranks,
    simulate_null,
    tau_odds,
)
from taustat.oracle import oracle_envelope_ranks, oracle_pointwise_ranks
from taustat.synthetic import household_epidemic, random_case_set

BANDS = DistanceBandSet.non_overlapping([0, 10, 20, 35, 50, 80, 120])


def _curve(values, bands=None):
    values = np.asarray(values, dtype=float)
    bands = bands or DistanceBandSet([(k, k + 1) for k in range(len(values))])
    return TauCurve(bands, values)


@pytest.mark.parametrize("shape, integer", [((20, 10), False), ((20, 10), True), ((7, 3), True), ((50, 1), False)])
def test_pointwise_ranks_match_oracle(shape, integer, rng):
    mat = rng.integers(0, 4, shape).astype(float) if integer else rng.normal(size=shape)
    np.testing.assert_array_equal(pointwise_ranks(mat), oracle_pointwise_ranks(mat))
    np.testing.assert_array_equal(pointwise_ranks(mat).min(axis=1), oracle_envelope_ranks(mat))


def test_identical_curves_tie():
    mat = np.ones((20, 5))
    res = extreme_rank_envelope(_curve(mat[0]), mat[1:])
    assert len(set(res.extreme_ranks.tolist())) == 1
    assert res.p_plus == 1.0
    assert res.exceedance == []


def test_dominant_curve_has_extreme_rank_one(rng):
    mat = rng.normal(size=(20, 6))
    mat[4, 2] = 100.0
    assert oracle_envelope_ranks(mat)[4] == 1
    assert pointwise_ranks(mat).min(axis=1)[4] == 1


def test_observed_above_all_sims_at_one_band(rng):
    sims = rng.uniform(0.5, 1.5, size=(19, 8))
    obs = np.median(sims, axis=0)
    obs[3] = 5.0
    res = extreme_rank_envelope(_curve(obs), sims, alpha=0.05)
    assert res.extreme_ranks[0] == 1
    # other curves sharing rank 1 (per-band minima/maxima) widen p_plus only
    assert res.p_minus == pytest.approx(1 / 20)
    assert res.p_plus >= res.p_minus


@pytest.mark.parametrize("seed", range(10))
def test_exceedance_only_below_critical_rank(seed):
    gen = np.random.default_rng(seed)
    sims = gen.normal(size=(99, 6))
    obs = gen.normal(size=6)
    obs[gen.integers(6)] += gen.choice([0.0, 4.0])
    res = extreme_rank_envelope(_curve(obs), sims)
    # curves at or above the critical rank build the envelope, so the
    # observed curve can only leave it when it is more extreme than that
    assert bool(res.exceedance) == (res.extreme_ranks[0] < res.critical_rank)


def test_too_few_sims_rejected(rng):
    with pytest.raises(InsufficientSims):
        extreme_rank_envelope(_curve(np.ones(3)), rng.normal(size=(18, 3)), alpha=0.05)


def test_band_set_mismatch_rejected():
    other = _curve(np.ones(3), DistanceBandSet([(0, 2), (2, 4), (4, 6)]))
    with pytest.raises(MismatchedBandSets):
        extreme_rank_envelope(_curve(np.ones(3)), [other] * 19)


def test_undefined_bands_dropped_listwise(rng):
    sims = rng.normal(size=(39, 4))
    sims[5, 1] = np.nan
    res = extreme_rank_envelope(_curve(rng.normal(size=4)), sims)
    assert res.dropped_bands == [1]
    assert np.isnan(res.lower[1]) and np.isfinite(res.lower[0])


@pytest.mark.parametrize("seed", range(5))
def test_envelope_widens_as_alpha_shrinks(seed):
    gen = np.random.default_rng(seed)
    sims = gen.normal(size=(199, 12))
    obs = _curve(gen.normal(size=12))
    prev = None
    for alpha in (0.2, 0.1, 0.05, 0.01):
        res = extreme_rank_envelope(obs, sims, alpha)
        if prev is not None:
            assert np.all(res.lower <= prev.lower) and np.all(res.upper >= prev.upper)
        prev = res


def test_erl_breaks_extreme_rank_ties():
    mat = np.array(
        [
            [0.0, 5.0, 5.0],
            [0.0, 1.0, 5.0],
            [2.0, 3.0, 1.0],
            [1.0, 2.0, 2.0],
            [3.0, 4.0, 3.0],
            [4.0, 0.0, 4.0],
        ]
    )
    ranks = pointwise_ranks(mat)
    assert ranks[0].min() == ranks[1].min() == 1
    order = erl_refinement(_curve(mat[0]), mat[1:]).order
    assert order[0] != order[1]


def test_erl_identical_curves_p_one():
    assert erl_refinement(_curve(np.ones(4)), np.ones((9, 4))).p_value == 1.0


def test_erl_p_within_extreme_rank_interval():
    gen = np.random.default_rng(3)
    for _ in range(100):
        mat = gen.integers(0, 6, size=(int(gen.integers(20, 40)), int(gen.integers(1, 8)))).astype(float)
        res = extreme_rank_envelope(_curve(mat[0]), mat[1:], alpha=0.05)
        assert res.p_minus - 1e-12 <= res.erl_p <= res.p_plus + 1e-12


def test_permutation_keeps_marks_multiset(four_cases, rng):
    perm = permute_time_marks(four_cases, rng)
    assert sorted(perm.onset) == sorted(four_cases.onset)
    np.testing.assert_array_equal(perm.x, four_cases.x)
    same = CaseSet(four_cases.ids, four_cases.x, four_cases.y, [3.0] * 4)
    assert permute_time_marks(same, rng) == same


def test_null_totals_are_permutation_invariant(rng):
    cs = random_case_set(rng, 30)
    rule = RelatednessRule(0, 5)
    pt = build_pair_table(cs, rule)
    whole = DistanceBandSet([(0, np.inf)])
    np.testing.assert_array_equal(null_matrix(pt, whole, cs.onset, 50, RngPolicy(1)), 1.0)


def test_simulate_null_is_reproducible(rng):
    cs = random_case_set(rng, 25)
    rule = RelatednessRule(1, 6)
    one = simulate_null(cs, rule, BANDS, 1, RngPolicy(5))
    assert len(one) == 1
    a = simulate_null(cs, rule, BANDS, 40, RngPolicy(5))
    b = simulate_null(cs, rule, BANDS, 40, RngPolicy(5))
    np.testing.assert_array_equal([c.values for c in a], [c.values for c in b])


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_null_matrix_thread_independent(threads):
    cs = household_epidemic(n_cases=60, seed=2)
    pt = build_pair_table(cs, RelatednessRule(7, 14))
    one = null_matrix(pt, BANDS, cs.onset, 300, RngPolicy(9), threads=1)
    many = null_matrix(pt, BANDS, cs.onset, 300, RngPolicy(9), threads=threads)
    assert one.tobytes() == many.tobytes()


def test_colocated_cases_give_no_evidence():
    gen = np.random.default_rng(0)
    cs = CaseSet([str(k) for k in range(12)], [5.0] * 12, [5.0] * 12, gen.integers(0, 20, 12))
    res = envelope_test(cs, RelatednessRule(0, 4, False), DistanceBandSet([(0, 10), (10, 20)]), n_sims=99)
    assert res.p_plus == 1.0
    assert res.exceedance == []
    assert res.dropped_bands == [1]


@pytest.mark.slow
def test_type_one_error_is_controlled():
    alpha, trials, s = 0.05, 500, 999
    bands = DistanceBandSet.non_overlapping([0, 15, 30, 50, 80, 140])
    rejections = 0
    for t in range(trials):
        gen = np.random.default_rng(10_000 + t)
        cs = random_case_set(gen, 30, extent=120, onset_range=40)
        rule = RelatednessRule(0, 6, False)
        pt = build_pair_table(cs, rule)
        c = band_counts(pt, bands)
        if c.total_related == 0:
            continue
        obs = tau_odds(c, bands)
        sims = null_matrix(pt, bands, cs.onset, s, RngPolicy(t))
        rejections += extreme_rank_envelope(obs, sims, alpha).p_plus <= alpha
    limit = alpha + 3 * math.sqrt(alpha * (1 - alpha) / trials)
    assert rejections / trials <= limit


def test_clustered_epidemic_detected():
    cs = household_epidemic(seed=0)
    res = envelope_test(cs, RelatednessRule(7, 14), DistanceBandSet.overlapping(), n_sims=999, rng=RngPolicy(0))
    assert res.clustering
    assert res.exceedance[0].kind == "above" and res.exceedance[0].d_from < 20
