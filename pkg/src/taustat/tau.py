"""Tau odds-ratio estimator and its marked-point bootstrap replicates."""
from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .core import DistanceBandSet, TauCurve
from .errors import DegenerateBackgroundOdds, OutOfRange, UndefinedBandWarning, UndefinedNeighbor
from .pairwise import BandCounts, MarkCounts

__all__ = [
    "OddsValue",
    "tau_values",
    "tau_odds",
    "interpolate_tau",
    "tau_mmpsb_replicate",
    "tau_mpsb_replicate",
    "MPSBReplicate",
    "local_tau",
    "multiplicities",
]


class OddsValue(NamedTuple):
    numerator: int
    denominator: int

    @property
    def value(self) -> float:
        if self.denominator == 0:
            return float("nan")
        return self.numerator / self.denominator


def tau_values(related, unrelated, total_related, total_unrelated):
    """Vectorised tau from integer counts.

    Computes ``(related * total_unrelated) / (unrelated * total_related)``,
    i.e. the band odds over the background odds, with a single rounding at
    the final division. Bands with no unrelated pairs are NaN. Rows whose
    background odds are zero or undefined are returned as all-NaN; callers
    decide whether that is an error.

    Parameters
    ----------
    related, unrelated : array_like of int, shape (..., bands)
    total_related, total_unrelated : int or array_like of int, shape (...)
    """
    related = np.asarray(related, dtype=np.int64)
    unrelated = np.asarray(unrelated, dtype=np.int64)
    tr = np.asarray(total_related, dtype=np.int64)[..., None]
    tu = np.asarray(total_unrelated, dtype=np.int64)[..., None]
    num = (related * tu).astype(float)
    den = (unrelated * tr).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out[np.broadcast_to(unrelated == 0, out.shape)] = np.nan
    degenerate = np.broadcast_to((tr == 0) | (tu == 0), out.shape)
    out[degenerate] = np.nan
    return out


def _check_background(total_related, total_unrelated):
    if total_related == 0 or total_unrelated == 0:
        raise DegenerateBackgroundOdds(
            f"background odds {total_related}/{total_unrelated} are zero or undefined; "
            "the relatedness rule relates none or all of the pairs"
        )


def tau_odds(counts: BandCounts, bands: DistanceBandSet, rule=None, provenance="point estimate") -> TauCurve:
    """Tau odds-ratio curve from :func:`~taustat.pairwise.band_counts` output."""
    _check_background(counts.total_related, counts.total_unrelated)
    values = tau_values(counts.related, counts.unrelated, counts.total_related, counts.total_unrelated)
    return TauCurve(bands, values, rule, provenance)


def interpolate_tau(curve: TauCurve, d: float) -> float:
    """Piecewise-linear tau at distance ``d`` through the band midpoints.

    Undefined bands are skipped (the nearest defined midpoints are joined)
    and an :class:`UndefinedBandWarning` is emitted when that happens.
    """
    mids = curve.midpoints
    if not (mids[0] <= d <= mids[-1]):
        raise OutOfRange(f"distance {d} outside midpoint range [{mids[0]}, {mids[-1]}]")
    k = int(np.searchsorted(mids, d, side="left"))
    if mids[k] == d and np.isfinite(curve.values[k]):
        return float(curve.values[k])
    ok = curve.defined
    left = np.flatnonzero(ok[:k])
    right = np.flatnonzero(ok[k:]) + k
    if left.size == 0 or right.size == 0:
        raise UndefinedNeighbor(f"no defined tau value on both sides of d={d}")
    a, b = left[-1], right[0]
    if a != k - 1 or b != k:
        warnings.warn(
            f"interpolating across undefined band(s) between midpoints {mids[a]} and {mids[b]}",
            UndefinedBandWarning,
            stacklevel=2,
        )
    if mids[b] == d:
        return float(curve.values[b])
    ya, yb = curve.values[a], curve.values[b]
    return float(ya + (yb - ya) * (d - mids[a]) / (mids[b] - mids[a]))


def multiplicities(indices, n) -> np.ndarray:
    """How many times each case appears in a resample (0-based indices)."""
    return np.bincount(np.asarray(indices), minlength=n)


def tau_mmpsb_replicate(mc: MarkCounts, resampled_indices, bands=None) -> TauCurve:
    """Modified marked point bootstrap replicate.

    Sums each resampled case's own mark counts (against all original cases)
    over the multiset, then forms odds and the tau ratio as for the point
    estimate. Zero counts simply add nothing.
    """
    bands = bands if bands is not None else mc.bands
    w = multiplicities(resampled_indices, mc.n)
    tr = int(w @ mc.total_related)
    tu = int(w @ mc.total_unrelated)
    _check_background(tr, tu)
    values = tau_values(w @ mc.related, w @ mc.unrelated, tr, tu)
    return TauCurve(bands, values, provenance="bootstrap replicate (MMPSB)")


class MPSBReplicate(NamedTuple):
    curve: TauCurve
    n_infinite: np.ndarray
    n_undefined: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        return np.isfinite(self.curve.values)


def local_tau(mc: MarkCounts) -> np.ndarray:
    """Per-case local tau ratios, shape ``(n, bands)``; may hold inf or NaN."""
    num = (mc.related * mc.total_unrelated[:, None]).astype(float)
    den = (mc.unrelated * mc.total_related[:, None]).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def tau_mpsb_replicate(mc: MarkCounts, resampled_indices, bands=None, nonfinite="propagate") -> MPSBReplicate:
    """Loh & Stein marked point bootstrap replicate: mean of local tau ratios.

    A case with no unrelated pairs in a band contributes an infinite local
    term; with no pairs at all, an undefined one. With ``nonfinite='propagate'``
    such terms make the band value inf/NaN. ``nonfinite='drop'`` averages only
    the finite terms instead. Per-band counts of infinite and undefined terms
    (with multiplicity) are returned either way.
    """
    if nonfinite not in ("propagate", "drop"):
        raise ValueError("nonfinite must be 'propagate' or 'drop'")
    bands = bands if bands is not None else mc.bands
    w = multiplicities(resampled_indices, mc.n)
    present = w > 0
    loc = local_tau(mc)[present]
    wp = w[present][:, None]
    n_inf = (np.isinf(loc) * wp).sum(axis=0)
    n_nan = (np.isnan(loc) * wp).sum(axis=0)
    if nonfinite == "propagate":
        values = (loc * wp).sum(axis=0) / w.sum()
    else:
        fin = np.isfinite(loc)
        with np.errstate(invalid="ignore", divide="ignore"):
            values = (np.where(fin, loc, 0.0) * wp).sum(axis=0) / (fin * wp).sum(axis=0)
    curve = TauCurve(bands, values, provenance="bootstrap replicate (MPSB)")
    return MPSBReplicate(curve, n_inf, n_nan)
