"""Spatial bootstrap distributions of tau curves.

Three resampling schemes share one stream of index multisets (replicate
``k`` draws from ``rng.generator("bootstrap", k)``), so runs with the same
seed resample the same cases whatever the method:

* ``risb``  resampled-index bootstrap: tau on the resampled data, dropping
  slot pairs that hold the same original case;
* ``mmpsb`` modified marked point bootstrap: sum the resampled cases' own
  mark counts against all cases, then take odds;
* ``mpsb``  Loh & Stein marked point bootstrap: average local tau ratios.
  Numerically fragile and not recommended; available for comparison.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .core import CaseSet, DistanceBandSet, RelatednessRule, RngPolicy, TauCurve
from .errors import NotRecommendedWarning, TooFewReplicates, ValidationError
from .pairwise import PairTable, band_sums, build_pair_table, mark_counts
from .tau import _check_background, local_tau, multiplicities, tau_values

__all__ = [
    "METHODS",
    "resample_indices",
    "tau_risb_replicate",
    "BootstrapRun",
    "run_bootstrap",
    "central_envelope",
]

METHODS = ("risb", "mmpsb", "mpsb")


def resample_indices(n: int, gen: np.random.Generator) -> np.ndarray:
    """``n`` uniform draws with replacement from ``0..n-1``."""
    if n < 2:
        raise ValidationError("need n >= 2 to resample")
    return gen.integers(0, n, size=n)


def _risb_counts(pt: PairTable, w, lo, hi):
    pw = w[..., pt.i] * w[..., pt.j]
    pz = pw * pt.z
    rel = band_sums(pz, lo, hi)
    tot = band_sums(pw, lo, hi)
    tr = pz.sum(axis=-1)
    tu = pw.sum(axis=-1) - tr
    return rel, tot - rel, tr, tu


def tau_risb_replicate(cs: CaseSet, rule: RelatednessRule, bands: DistanceBandSet, indices, pair_table=None) -> TauCurve:
    """Tau on the resampled data with self-comparisons removed.

    Every ordered slot pair ``(p, q)``, ``p != q``, counts once unless both
    slots hold the same original case. Equivalently each distinct ordered
    case pair ``(a, b)`` is weighted by ``w_a * w_b``, where ``w`` is the
    resample multiplicity.
    """
    pt = pair_table if pair_table is not None else build_pair_table(cs, rule)
    lo, hi = pt.edge_positions(bands)
    w = multiplicities(indices, pt.n).astype(np.int64)
    rel, unrel, tr, tu = _risb_counts(pt, w, lo, hi)
    _check_background(int(tr), int(tu))
    return TauCurve(bands, tau_values(rel, unrel, tr, tu), rule, "bootstrap replicate (RISB)")


@dataclass(frozen=True, eq=False)
class BootstrapRun:
    """Output of :func:`run_bootstrap`.

    Attributes
    ----------
    values : ndarray, shape (N, bands)
        Replicate tau values; failed replicates are all-NaN rows.
    distinct : ndarray of int, shape (N,)
        Number of distinct cases in each resample.
    failed : ndarray of bool, shape (N,)
        Replicates whose background odds were zero or undefined.
    n_infinite, n_undefined : ndarray, shape (N, bands) or None
        MPSB only: local terms that were infinite / undefined.
    """

    method: str
    bands: DistanceBandSet
    n: int
    values: np.ndarray
    distinct: np.ndarray
    failed: np.ndarray
    n_infinite: np.ndarray | None = None
    n_undefined: np.ndarray | None = None
    rule: RelatednessRule | None = None

    @property
    def N(self) -> int:
        return len(self.values)

    @property
    def curves(self) -> list[TauCurve]:
        prov = f"bootstrap replicate ({self.method.upper()})"
        return [TauCurve(self.bands, row, self.rule, prov) for row in self.values]

    @property
    def retained_pairs(self) -> np.ndarray:
        """Distinct original ordered pairs carrying information per replicate."""
        k = self.distinct.astype(np.int64)
        if self.method == "risb":
            return k * (k - 1)
        return k * (self.n - 1)

    @property
    def retention(self) -> np.ndarray:
        return self.retained_pairs / (self.n * (self.n - 1))

    @property
    def failed_fraction(self) -> float:
        return float(self.failed.mean())

    @property
    def finite_fraction(self) -> float:
        """Share of replicates that are finite at every band."""
        return float(np.all(np.isfinite(self.values), axis=1).mean())


def run_bootstrap(
    cs: CaseSet,
    rule: RelatednessRule,
    bands: DistanceBandSet,
    method: str,
    N: int,
    rng: RngPolicy,
    threads=None,
    nonfinite: str = "propagate",
    pair_table: PairTable | None = None,
) -> BootstrapRun:
    """Generate ``N`` bootstrap tau curves with the chosen method.

    ``nonfinite`` applies to MPSB only (see
    :func:`taustat.tau.tau_mpsb_replicate`).
    """
    method = method.lower()
    if method not in METHODS:
        raise ValidationError(f"unknown bootstrap method {method!r}; choose from {METHODS}")
    if N < 1:
        raise ValidationError("N must be >= 1")
    if nonfinite not in ("propagate", "drop"):
        raise ValidationError("nonfinite must be 'propagate' or 'drop'")
    if method == "mpsb":
        warnings.warn(
            "MPSB averages local tau ratios and is numerically fragile; MMPSB is recommended",
            NotRecommendedWarning,
            stacklevel=2,
        )
    pt = pair_table if pair_table is not None else build_pair_table(cs, rule)
    n = pt.n
    nb = len(bands)
    lo, hi = pt.edge_positions(bands)
    if method != "risb":
        mc = mark_counts(pt, bands)
    if method == "mpsb":
        loc = local_tau(mc)
        loc_inf = np.isinf(loc).astype(np.int64)
        loc_nan = np.isnan(loc).astype(np.int64)
        loc_fin = np.where(np.isfinite(loc), loc, 0.0)

    def weights(a, b):
        return np.stack([multiplicities(resample_indices(n, rng.generator("bootstrap", k)), n) for k in range(a, b)]).astype(np.int64)

    def chunk(a, b):
        W = weights(a, b)
        distinct = np.count_nonzero(W, axis=1)
        n_inf = n_nan = np.zeros((b - a, nb))
        if method == "risb":
            rel, unrel, tr, tu = _risb_counts(pt, W, lo, hi)
            vals = tau_values(rel, unrel, tr, tu)
            failed = (tr == 0) | (tu == 0)
        elif method == "mmpsb":
            tr = W @ mc.total_related
            tu = W @ mc.total_unrelated
            vals = tau_values(W @ mc.related, W @ mc.unrelated, tr, tu)
            failed = (tr == 0) | (tu == 0)
        else:
            n_inf = W @ loc_inf
            n_nan = W @ loc_nan
            s = W.astype(float) @ loc_fin
            if nonfinite == "propagate":
                vals = s / n
                vals[n_inf > 0] = np.inf
                vals[n_nan > 0] = np.nan
            else:
                with np.errstate(invalid="ignore", divide="ignore"):
                    vals = s / (n - n_inf - n_nan)
            failed = ~np.any(np.isfinite(vals), axis=1)
        return np.column_stack([vals, distinct, failed, n_inf, n_nan])

    out = map_chunks(chunk, N, threads)
    values = out[:, :nb]
    distinct = out[:, nb].astype(np.int64)
    failed = out[:, nb + 1].astype(bool)
    n_inf = out[:, nb + 2 : 2 * nb + 2].astype(np.int64) if method == "mpsb" else None
    n_nan = out[:, 2 * nb + 2 :].astype(np.int64) if method == "mpsb" else None
    values[failed] = np.nan
    return BootstrapRun(method, bands, n, values, distinct, failed, n_inf, n_nan, rule)


def central_envelope(run: BootstrapRun, level: float = 0.95):
    """Pointwise percentile bounds of the replicate values per band.

    For display only: a pointwise band around the point estimate is not a
    hypothesis test. Non-finite values and failed replicates are ignored.

    Returns
    -------
    lower, upper : ndarray, shape (bands,)
    """
    if not 0 < level <= 1:
        raise ValidationError("level must lie in (0, 1]")
    q = (1 - level) / 2
    lower = np.empty(len(run.bands))
    upper = np.empty(len(run.bands))
    for b in range(len(run.bands)):
        col = run.values[:, b]
        col = col[np.isfinite(col)]
        if col.size < 2:
            raise TooFewReplicates(f"band {b} has {col.size} defined replicate values; need >= 2")
        lower[b], upper[b] = np.quantile(col, [q, 1 - q])
    return lower, upper
