"""Global envelope test of "no spatiotemporal clustering".

Onset times are permuted over fixed locations to simulate tau under the
null, and the observed curve is ranked against the simulations with a
two-sided extreme-rank envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._parallel import map_chunks
from .core import CaseSet, DistanceBandSet, RelatednessRule, RngPolicy, TauCurve
from .errors import InsufficientSims, MismatchedBandSets, ValidationError
from .pairwise import PairTable, band_counts, band_sums, build_pair_table
from .tau import _check_background, tau_odds, tau_values

__all__ = [
    "permute_time_marks",
    "simulate_null",
    "null_matrix",
    "pointwise_ranks",
    "extreme_rank_envelope",
    "erl_refinement",
    "EnvelopeTestResult",
    "ExceedanceRegion",
    "envelope_test",
]


def permute_time_marks(cs: CaseSet, gen: np.random.Generator) -> CaseSet:
    """Uniformly permute onset times over the fixed case locations."""
    return cs.with_onsets(cs.onset[gen.permutation(cs.n)])


def null_matrix(pt: PairTable, bands: DistanceBandSet, onset, n_sims: int, rng: RngPolicy, threads=None):
    """Tau values for ``n_sims`` time-mark permutations, shape ``(n_sims, bands)``.

    Distances come from ``pt``; only the marks are recomputed.
    """
    if n_sims < 1:
        raise ValidationError("n_sims must be >= 1")
    onset = np.asarray(onset, dtype=float)
    n = pt.n
    lo, hi = pt.edge_positions(bands)
    width = hi - lo
    # the multiset of ordered onset pairs is permutation invariant, so the
    # background totals are fixed for every replicate
    tr = int(np.count_nonzero(pt.marks_for(onset)))
    tu = pt.n_pairs - tr
    _check_background(tr, tu)

    def chunk(a, b):
        z = np.empty((b - a, pt.n_pairs), dtype=bool)
        for r, k in enumerate(range(a, b)):
            perm = rng.generator("permutation", k).permutation(n)
            z[r] = pt.marks_for(onset[perm])
        rel = band_sums(z, lo, hi)
        return tau_values(rel, width - rel, tr, tu)

    return map_chunks(chunk, n_sims, threads)


def simulate_null(cs, rule, bands, n_sims, rng: RngPolicy, threads=None, pair_table=None) -> list[TauCurve]:
    pt = pair_table if pair_table is not None else build_pair_table(cs, rule)
    mat = null_matrix(pt, bands, cs.onset, n_sims, rng, threads)
    return [TauCurve(bands, row, rule, "null permutation") for row in mat]


def pointwise_ranks(matrix) -> np.ndarray:
    """Two-sided pointwise ranks per column.

    Rank from below is ``1 + #{values < x}`` and from above
    ``1 + #{values > x}``, so ties all take the most extreme rank of their
    tail. The two-sided rank is the smaller of the two.
    """
    m = np.asarray(matrix, dtype=float)
    s = np.sort(m, axis=0)
    out = np.empty(m.shape, dtype=np.int64)
    rows = m.shape[0]
    for k in range(m.shape[1]):
        below = np.searchsorted(s[:, k], m[:, k], side="left")
        above = rows - np.searchsorted(s[:, k], m[:, k], side="right")
        out[:, k] = np.minimum(below, above) + 1
    return out


class ExceedanceRegion(NamedTuple):
    start: int
    stop: int
    kind: str
    d_from: float
    d_to: float

    def to_dict(self):
        return {
            "band_start": int(self.start),
            "band_stop": int(self.stop),
            "kind": self.kind,
            "midpoint_from": float(self.d_from),
            "midpoint_to": float(self.d_to),
        }


@dataclass(frozen=True, eq=False)
class EnvelopeTestResult:
    observed: TauCurve
    lower: np.ndarray
    upper: np.ndarray
    median: np.ndarray
    extreme_ranks: np.ndarray
    p_interval: tuple[float, float]
    critical_rank: int
    exceedance: list[ExceedanceRegion]
    alpha: float
    n_sims: int
    dropped_bands: list[int] = field(default_factory=list)
    erl_p: float | None = None

    @property
    def p_minus(self):
        return self.p_interval[0]

    @property
    def p_plus(self):
        return self.p_interval[1]

    @property
    def clustering(self) -> bool:
        return any(r.kind == "above" for r in self.exceedance)

    @property
    def inhibition(self) -> bool:
        return any(r.kind == "below" for r in self.exceedance)


def _as_matrix(observed: TauCurve, sims):
    if isinstance(sims, np.ndarray):
        mat = np.atleast_2d(np.asarray(sims, dtype=float))
        if mat.shape[1] != len(observed.bands):
            raise MismatchedBandSets("simulation matrix width does not match the band set")
    else:
        for c in sims:
            if c.bands != observed.bands:
                raise MismatchedBandSets("all curves must share the observed band set")
        mat = np.array([c.values for c in sims], dtype=float).reshape(len(sims), len(observed.bands))
    return np.vstack([observed.values[None, :], mat])


def _runs(mask):
    runs = []
    k = 0
    while k < len(mask):
        if mask[k]:
            j = k
            while j + 1 < len(mask) and mask[j + 1]:
                j += 1
            runs.append((k, j))
            k = j + 1
        else:
            k += 1
    return runs


def extreme_rank_envelope(observed: TauCurve, sims, alpha: float = 0.05) -> EnvelopeTestResult:
    """Two-sided extreme-rank global envelope and p-value interval.

    Parameters
    ----------
    observed : TauCurve
        The data's curve; it is row 0 of the ranking.
    sims : list of TauCurve or ndarray, shape (s, bands)
        Null simulations on the same band set.
    alpha : float
        Significance level. ``s + 1`` must be at least ``1 / alpha``.

    Notes
    -----
    Bands undefined in any curve are dropped for every curve before
    ranking and reported in ``dropped_bands``. The critical rank is the
    ``ceil(alpha * (s + 1))``-th smallest extreme rank; the envelope is the
    pointwise min/max over curves whose extreme rank reaches it.
    """
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    full = _as_matrix(observed, sims)
    total = full.shape[0]
    s = total - 1
    if total < 1 / alpha - 1e-9:
        raise InsufficientSims(
            f"{s} simulations give a vacuous envelope at alpha={alpha}; need s + 1 >= {math.ceil(1 / alpha)} "
            "(2500 simulations is the usual choice)"
        )
    keep = np.all(np.isfinite(full), axis=0)
    if not keep.any():
        raise ValidationError("no band is defined in every curve")
    dropped = [int(k) for k in np.flatnonzero(~keep)]
    mat = full[:, keep]
    ranks = pointwise_ranks(mat)
    R = ranks.min(axis=1)
    R0 = R[0]
    p_plus = np.count_nonzero(R <= R0) / total
    p_minus = (np.count_nonzero(R[1:] < R0) + 1) / total
    pos = max(math.ceil(alpha * total - 1e-9), 1)
    r_crit = int(np.sort(R)[pos - 1])
    inside = R >= r_crit
    nb = len(observed.bands)
    lower = np.full(nb, np.nan)
    upper = np.full(nb, np.nan)
    lower[keep] = mat[inside].min(axis=0)
    upper[keep] = mat[inside].max(axis=0)
    median = np.full(nb, np.nan)
    median[keep] = np.median(mat[1:], axis=0) if s > 0 else mat[0]
    obs = observed.values
    mids = observed.midpoints
    with np.errstate(invalid="ignore"):
        above = keep & (obs > upper)
        below = keep & (obs < lower)
    regions = [ExceedanceRegion(a, b, "above", mids[a], mids[b]) for a, b in _runs(above)]
    regions += [ExceedanceRegion(a, b, "below", mids[a], mids[b]) for a, b in _runs(below)]
    regions.sort(key=lambda r: r.start)
    erl = _erl_p(ranks)
    return EnvelopeTestResult(
        observed=observed,
        lower=lower,
        upper=upper,
        median=median,
        extreme_ranks=R,
        p_interval=(float(p_minus), float(p_plus)),
        critical_rank=r_crit,
        exceedance=regions,
        alpha=float(alpha),
        n_sims=s,
        dropped_bands=dropped,
        erl_p=erl,
    )


class ERLResult(NamedTuple):
    order: np.ndarray
    p_value: float


def _sorted_rank_vectors(ranks):
    return [tuple(int(v) for v in row) for row in np.sort(ranks, axis=1)]


def _erl_p(ranks):
    vecs = _sorted_rank_vectors(ranks)
    v0 = vecs[0]
    return sum(1 for v in vecs if v <= v0) / len(vecs)


def erl_refinement(observed: TauCurve, sims) -> ERLResult:
    """Extreme rank length ordering of all curves (observed first).

    Each curve's pointwise ranks are sorted ascending and the curves are
    ordered lexicographically, smaller meaning more extreme. ``order[i]`` is
    the 1-based position of curve ``i`` with ties sharing the lowest
    position; ``p_value`` counts curves at least as extreme as the observed.
    """
    full = _as_matrix(observed, sims)
    keep = np.all(np.isfinite(full), axis=0)
    ranks = pointwise_ranks(full[:, keep])
    vecs = _sorted_rank_vectors(ranks)
    ordered = sorted(vecs)
    first = {}
    for pos, v in enumerate(ordered, start=1):
        first.setdefault(v, pos)
    order = np.array([first[v] for v in vecs])
    return ERLResult(order, _erl_p(ranks))


def envelope_test(cs, rule, bands, n_sims=2500, alpha=0.05, rng: RngPolicy | None = None, threads=None):
    """Observed tau curve plus its global envelope test in one call."""
    rng = rng if rng is not None else RngPolicy(0)
    pt = build_pair_table(cs, rule)
    observed = tau_odds(band_counts(pt, bands), bands, rule)
    sims = null_matrix(pt, bands, cs.onset, n_sims, rng, threads)
    return extreme_rank_envelope(observed, sims, alpha)
