import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taustat import CaseSet, DistanceBandSet, RelatednessRule, band_counts, build_pair_table, mark_counts
from taustat.synthetic import random_case_set


def test_four_case_totals(four_cases, sym2):
    pt = build_pair_table(four_cases, sym2)
    assert pt.n_pairs == 12
    assert int(pt.z.sum()) == 2
    related = {(four_cases.ids[i], four_cases.ids[j]) for i, j, z in zip(pt.i, pt.j, pt.z) if z}
    assert related == {("C", "D"), ("D", "C")}


def test_four_case_band_counts(four_cases, sym2, two_bands):
    c = band_counts(build_pair_table(four_cases, sym2), two_bands)
    np.testing.assert_array_equal(c.related, [2, 0])
    np.testing.assert_array_equal(c.unrelated, [2, 6])
    assert (c.total_related, c.total_unrelated) == (2, 10)


def test_four_case_mark_counts(four_cases, sym2, two_bands):
    mc = mark_counts(build_pair_table(four_cases, sym2), two_bands)
    assert mc.related[2, 0] == 1  # C with D
    assert mc.related[0, 0] == 0  # A
    c = band_counts(build_pair_table(four_cases, sym2), two_bands)
    np.testing.assert_array_equal(mc.related.sum(axis=0), c.related)
    np.testing.assert_array_equal(mc.unrelated.sum(axis=0), c.unrelated)
    assert mc.total_related.sum() == c.total_related


def test_pair_count_for_188_cases():
    cs = random_case_set(np.random.default_rng(0), 188)
    assert build_pair_table(cs, RelatednessRule(0, 3)).n_pairs == 35_156


def test_colocated_pair_in_zero_band():
    cs = CaseSet(["a", "b", "c"], [5, 5, 50], [5, 5, 50], [0, 1, 9])
    c = band_counts(build_pair_table(cs, RelatednessRule(0, 1, False)), DistanceBandSet([(0, 1)]))
    assert c.related[0] == 2


def test_boundary_tie_goes_to_upper_band():
    cs = CaseSet(["a", "b"], [0, 0], [0, 15], [0, 1])
    c = band_counts(build_pair_table(cs, RelatednessRule(0, 1, False)), DistanceBandSet([(0, 15), (15, 30)]))
    np.testing.assert_array_equal(c.related, [0, 2])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40), lattice=st.booleans())
def test_whole_plane_band_partitions_pairs(seed, n, lattice):
    cs = random_case_set(np.random.default_rng(seed), n, lattice=lattice)
    c = band_counts(build_pair_table(cs, RelatednessRule(1, 6)), DistanceBandSet([(0, np.inf)]))
    assert c.related[0] + c.unrelated[0] == n * (n - 1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_symmetric_rule_gives_symmetric_marks(seed, n):
    cs = random_case_set(np.random.default_rng(seed), n)
    pt = build_pair_table(cs, RelatednessRule(2, 9, directional=False))
    z = np.zeros((n, n), dtype=bool)
    z[pt.i, pt.j] = pt.z
    np.testing.assert_array_equal(z, z.T)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40), directional=st.booleans())
def test_permutation_preserves_total_related(seed, n, directional):
    gen = np.random.default_rng(seed)
    cs = random_case_set(gen, n)
    pt = build_pair_table(cs, RelatednessRule(0, 5, directional))
    permuted = cs.onset[gen.permutation(n)]
    assert np.count_nonzero(pt.marks_for(permuted)) == np.count_nonzero(pt.z)


@pytest.mark.parametrize("split", [3.0, 17.5, 40.0])
def test_split_band_counts_are_additive(split, rng):
    cs = random_case_set(rng, 40, lattice=True)
    pt = build_pair_table(cs, RelatednessRule(0, 4))
    whole = band_counts(pt, DistanceBandSet([(0, 60)]))
    parts = band_counts(pt, DistanceBandSet([(0, split), (split, 60)]))
    assert parts.related.sum() == whole.related[0]
    assert parts.unrelated.sum() == whole.unrelated[0]
