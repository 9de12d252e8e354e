"""Pairwise substrate: distances, relatedness marks and per-band counts.

All ordered pairs ``i != j`` are stored once, sorted by distance. A band
count is then the difference of a cumulative sum at two insertion points,
so a full band set costs O(pairs + bands) per replicate and every count is
an exact integer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import CaseSet, DistanceBandSet, RelatednessRule

__all__ = [
    "PairTable",
    "BandCounts",
    "MarkCounts",
    "build_pair_table",
    "band_counts",
    "mark_counts",
    "band_sums",
]


@dataclass(frozen=True, eq=False)
class PairTable:
    """Distances and relatedness marks for every ordered pair ``i != j``.

    Attributes
    ----------
    n : int
        Number of cases.
    i, j : ndarray of int
        Pair endpoints, sorted by ascending distance (stable in ``(i, j)``).
    d : ndarray of float
        Euclidean distance of each pair, ascending.
    z : ndarray of bool
        Relatedness mark of each pair.
    dist : ndarray, shape (n, n)
        Full symmetric distance matrix (diagonal zero, never used as a pair).
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    d: np.ndarray
    z: np.ndarray
    dist: np.ndarray
    rule: RelatednessRule

    @property
    def n_pairs(self) -> int:
        return len(self.d)

    def marks_for(self, onset) -> np.ndarray:
        """Relatedness marks under alternative onset times (locations fixed)."""
        onset = np.asarray(onset, dtype=float)
        return self.rule.related(onset[self.i], onset[self.j])

    def with_onsets(self, onset) -> "PairTable":
        z = self.marks_for(onset)
        z.setflags(write=False)
        return PairTable(self.n, self.i, self.j, self.d, z, self.dist, self.rule)

    def edge_positions(self, bands: DistanceBandSet):
        """Insertion points of band edges in the sorted distances.

        ``side='left'`` makes the count below an edge ``e`` equal to
        ``#{d < e}``, which gives the half-closed ``[low, high)`` convention.
        """
        lo = np.searchsorted(self.d, bands.lows, side="left")
        hi = np.searchsorted(self.d, bands.highs, side="left")
        return lo, hi


def build_pair_table(cs: CaseSet, rule: RelatednessRule) -> PairTable:
    n = cs.n
    coords = cs.coords
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    d = dist[ii, jj]
    order = np.argsort(d, kind="stable")
    ii, jj, d = ii[order], jj[order], d[order]
    z = rule.related(cs.onset[ii], cs.onset[jj])
    for a in (ii, jj, d, z, dist):
        a.setflags(write=False)
    return PairTable(n, ii, jj, d, z, dist, rule)


class BandCounts(NamedTuple):
    related: np.ndarray
    unrelated: np.ndarray
    total_related: int
    total_unrelated: int


class MarkCounts(NamedTuple):
    """Per-case related/unrelated counts, shape ``(n, bands)`` and ``(n,)``."""

    related: np.ndarray
    unrelated: np.ndarray
    total_related: np.ndarray
    total_unrelated: np.ndarray
    bands: DistanceBandSet | None = None

    @property
    def n(self) -> int:
        return len(self.total_related)


def band_sums(weights, lo, hi):
    """Sum ``weights`` over the sorted-pair slices ``[lo[b], hi[b])``.

    ``weights`` may be 1-D (one replicate) or 2-D (replicates by pairs).
    Integer inputs stay integer.
    """
    weights = np.asarray(weights)
    if weights.dtype == bool:
        weights = weights.astype(np.int64)
    pad = [(0, 0)] * (weights.ndim - 1) + [(1, 0)]
    cs = np.pad(np.cumsum(weights, axis=-1), pad)
    return cs[..., hi] - cs[..., lo]


def band_counts(pt: PairTable, bands: DistanceBandSet, z=None) -> BandCounts:
    """Related and unrelated ordered-pair counts per band.

    ``z`` overrides the table's marks (used by the permutation null).
    """
    z = pt.z if z is None else z
    lo, hi = pt.edge_positions(bands)
    related = band_sums(z, lo, hi)
    unrelated = (hi - lo) - related
    total_related = int(np.count_nonzero(z))
    return BandCounts(related, unrelated, total_related, pt.n_pairs - total_related)


def mark_counts(pt: PairTable, bands: DistanceBandSet) -> MarkCounts:
    """Per-case decomposition of :func:`band_counts` (case = first pair index)."""
    n = pt.n
    lo, hi = pt.edge_positions(bands)
    related = np.empty((n, len(bands)), dtype=np.int64)
    unrelated = np.empty_like(related)
    for b, (a, c) in enumerate(zip(lo, hi)):
        i = pt.i[a:c]
        z = pt.z[a:c]
        related[:, b] = np.bincount(i[z], minlength=n)
        unrelated[:, b] = np.bincount(i[~z], minlength=n)
    total_related = np.bincount(pt.i[pt.z], minlength=n)
    total_unrelated = np.bincount(pt.i[~pt.z], minlength=n)
    return MarkCounts(related, unrelated, total_related, total_unrelated, bands)
