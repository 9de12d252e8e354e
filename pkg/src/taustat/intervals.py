"""Clustering-range estimation and confidence intervals.

The endpoint of clustering is where the interpolated tau curve first
falls to 1 from above. Each bootstrap replicate that does the same
contributes one crossing distance; the crossing sample then gives a
percentile or BCa interval. Replicates that never cross are excluded and
the proportion used is reported, since conditioning on crossing biases
the interval in a way that cannot be corrected here.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from .bootstrap import BootstrapRun, run_bootstrap
from .core import RelatednessRule, RngPolicy, TauCurve
from .errors import (
    BimodalityWarning,
    DegenerateBackgroundOdds,
    DegenerateBias,
    NoCrossings,
    NoInhibition,
    ProportionUsedWarning,
    TooFewValues,
    ValidationError,
)
from .pairwise import band_counts, build_pair_table
from .tau import tau_odds

__all__ = [
    "first_down_crossing",
    "estimate_endpoint",
    "CrossingSample",
    "extract_crossings",
    "ConfidenceInterval",
    "percentile_ci",
    "bca_ci",
    "estimate_inhibition_start",
    "inhibition_crossings",
    "skew_summary",
    "bimodality",
    "areal_ratio",
    "EndpointEstimate",
    "estimate_range",
    "summarise_crossings",
    "calibrate_window",
]

BCA_MIN_SAMPLE = 20


def first_down_crossing(mids, values, level=1.0):
    """Distance of the first fall of a curve to ``level`` from above.

    ``level`` may be a scalar or a per-band threshold. Non-finite values are
    skipped. Reaching the level exactly at a midpoint counts as crossing
    there.

    Returns
    -------
    (distance or None, status) with status one of ``"crossed"``,
    ``"started_below"``, ``"never_crossed"``, ``"undefined"``.
    """
    mids = np.asarray(mids, dtype=float)
    g = np.asarray(values, dtype=float) - level
    ok = np.isfinite(g)
    if np.count_nonzero(ok) < 2:
        return None, "undefined"
    m, g = mids[ok], g[ok]
    if g[0] <= 0:
        return None, "started_below"
    hit = np.flatnonzero(g <= 0)
    if hit.size == 0:
        return None, "never_crossed"
    k = hit[0]
    if g[k] == 0:
        return float(m[k]), "crossed"
    return float(m[k - 1] + g[k - 1] / (g[k - 1] - g[k]) * (m[k] - m[k - 1])), "crossed"


def estimate_endpoint(curve: TauCurve):
    """Clustering endpoint of a curve, or None if it does not fall through 1."""
    return first_down_crossing(curve.midpoints, curve.values)[0]


class CrossingSample(NamedTuple):
    values: np.ndarray
    N: int
    started_below: int
    never_crossed: int
    failed: int

    @property
    def proportion_used(self) -> float:
        return len(self.values) / self.N

    def counts(self):
        return {
            "used": len(self.values),
            "started_below": self.started_below,
            "never_crossed": self.never_crossed,
            "failed": self.failed,
            "total": self.N,
        }


def _collect(rows, mids, fn, failed):
    out = []
    tally = {"started_below": 0, "never_crossed": 0, "undefined": 0}
    n_failed = 0
    for row, bad in zip(rows, failed):
        if bad:
            n_failed += 1
            continue
        d, status = fn(mids, row)
        if d is None:
            tally[status] += 1
        else:
            out.append(d)
    return np.array(out, dtype=float), tally, n_failed + tally["undefined"]


def extract_crossings(run: BootstrapRun, level=1.0) -> CrossingSample:
    """Per-replicate first downward crossings of ``level``.

    Raises
    ------
    NoCrossings
        If no replicate crosses.
    """
    vals, tally, failed = _collect(
        run.values, run.bands.midpoints, lambda m, v: first_down_crossing(m, v, level), run.failed
    )
    if vals.size == 0:
        raise NoCrossings(f"none of the {run.N} replicates falls through tau = {level}")
    return CrossingSample(vals, run.N, tally["started_below"], tally["never_crossed"], failed)


class ConfidenceInterval(NamedTuple):
    low: float
    high: float
    method: str
    coverage: float
    fallback: bool = False

    def as_tuple(self):
        return (self.low, self.high)


def _check_coverage(coverage):
    if not 0 < coverage < 1:
        raise ValidationError("coverage must lie in (0, 1)")


def percentile_ci(sample, coverage=0.95) -> ConfidenceInterval:
    """Empirical quantiles at ``(1 - coverage)/2`` and ``(1 + coverage)/2``.

    Quantiles interpolate linearly between order statistics.
    """
    _check_coverage(coverage)
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise TooFewValues(f"percentile interval needs >= 2 values, got {x.size}")
    q = (1 - coverage) / 2
    low, high = np.quantile(x, [q, 1 - q])
    return ConfidenceInterval(float(low), float(high), "percentile", coverage)


def bca_ci(sample, point_estimate, coverage=0.95) -> ConfidenceInterval:
    """Bias-corrected and accelerated interval from a bootstrap sample.

    The bias correction is ``z0 = ndtri(#{sample < point_estimate} / B)``.
    The acceleration is the jackknife skewness of the sample mean computed
    over the bootstrap sample itself (leave-one-out means), which
    approximates Efron's jackknife over the original data.

    If every value lies on one side of ``point_estimate`` the bias
    correction is infinite; a percentile interval is returned instead with
    ``fallback=True`` and a :class:`DegenerateBias` warning.
    """
    _check_coverage(coverage)
    x = np.asarray(sample, dtype=float)
    B = x.size
    if B < BCA_MIN_SAMPLE:
        raise TooFewValues(
            f"BCa needs at least {BCA_MIN_SAMPLE} bootstrap values, got {B}; use a percentile interval"
        )
    if not math.isfinite(point_estimate):
        raise ValidationError("point estimate must be finite")
    prop = np.count_nonzero(x < point_estimate) / B
    if prop in (0.0, 1.0):
        warnings.warn(
            "all bootstrap values lie on one side of the point estimate; "
            "returning a percentile interval",
            DegenerateBias,
            stacklevel=2,
        )
        return percentile_ci(x, coverage)._replace(fallback=True)
    z0 = special.ndtri(prop)
    loo = (x.sum() - x) / (B - 1)
    dev = loo.mean() - loo
    den = 6 * (dev**2).sum() ** 1.5
    a = (dev**3).sum() / den if den > 0 else 0.0
    alpha = (1 - coverage) / 2
    zq = special.ndtri(np.array([alpha, 1 - alpha]))
    levels = special.ndtr(z0 + (z0 + zq) / (1 - a * (z0 + zq)))
    low, high = np.quantile(x, levels)
    return ConfidenceInterval(float(low), float(high), "BCa", coverage)


def _first_exit_below(mids, values, threshold=1.0):
    """First distance where a curve, having been at/above ``threshold``, drops below it."""
    mids = np.asarray(mids, dtype=float)
    g = np.asarray(values, dtype=float) - threshold
    ok = np.isfinite(g)
    if np.count_nonzero(ok) < 2:
        return None, "undefined"
    m, g = mids[ok], g[ok]
    start = np.flatnonzero(g >= 0)
    if start.size == 0:
        return None, "started_below"
    after = np.flatnonzero(g[start[0]:] < 0)
    if after.size == 0:
        return None, "never_crossed"
    k = start[0] + after[0]
    # g[k-1] >= 0 > g[k]: k is the first negative value after the start
    if g[k - 1] == 0:
        return float(m[k - 1]), "crossed"
    return float(m[k - 1] + g[k - 1] / (g[k - 1] - g[k]) * (m[k] - m[k - 1])), "crossed"


def estimate_inhibition_start(curve: TauCurve, envelope=None) -> float:
    """Distance at which the curve first drops from at/above into inhibition.

    Without ``envelope`` the threshold is tau = 1. With an
    :class:`~taustat.nulltest.EnvelopeTestResult` the threshold is the
    global envelope's lower bound, and the test must have found a
    below-envelope region.

    Raises
    ------
    NoInhibition
    """
    threshold = 1.0
    if envelope is not None:
        if not envelope.inhibition:
            raise NoInhibition("the envelope test found no region below the null envelope")
        threshold = envelope.lower
    d, status = _first_exit_below(curve.midpoints, curve.values, threshold)
    if d is None:
        raise NoInhibition(f"curve never drops into inhibition ({status})")
    return d


def inhibition_crossings(run: BootstrapRun, envelope=None) -> CrossingSample:
    """Bootstrap sample of inhibition startpoints (see :func:`estimate_inhibition_start`)."""
    threshold = 1.0 if envelope is None else envelope.lower
    vals, tally, failed = _collect(
        run.values, run.bands.midpoints, lambda m, v: _first_exit_below(m, v, threshold), run.failed
    )
    if vals.size == 0:
        raise NoInhibition(f"none of the {run.N} replicates drops into inhibition")
    return CrossingSample(vals, run.N, tally["started_below"], tally["never_crossed"], failed)


def skew_summary(sample, point_estimate=None):
    x = np.asarray(sample, dtype=float)
    mean, median = float(x.mean()), float(np.median(x))
    out = {
        "mean": mean,
        "median": median,
        "skew_direction": "positive" if mean > median else "negative" if mean < median else "none",
        "skewness": float(stats.skew(x)) if x.size > 2 and x.std() > 0 else 0.0,
    }
    if point_estimate is not None:
        out["mean_minus_point"] = mean - point_estimate
        out["median_minus_point"] = median - point_estimate
    return out


def bimodality(sample, min_height=0.1, max_dip=0.7, grid=512):
    """Heuristic multimodality check on a crossing sample.

    Counts local maxima of a Gaussian kernel density estimate that reach
    ``min_height`` of the tallest peak and are separated from their
    neighbouring retained peak by a trough lower than ``max_dip`` times the
    smaller peak. Sarle's bimodality coefficient is reported alongside
    (values above 5/9 suggest bimodality).
    """
    x = np.asarray(sample, dtype=float)
    out = {"n_modes": 1, "modes": [], "bimodal": False, "sarle_coefficient": None}
    if x.size < 4 or np.ptp(x) == 0:
        return out
    g = stats.skew(x)
    k = stats.kurtosis(x, bias=False) if x.size > 3 else 0.0
    n = x.size
    out["sarle_coefficient"] = float((g**2 + 1) / (k + 3 * (n - 1) ** 2 / ((n - 2) * (n - 3))))
    try:
        kde = stats.gaussian_kde(x)
    except np.linalg.LinAlgError:
        return out
    xs = np.linspace(x.min(), x.max(), grid)
    ys = kde(xs)
    peaks = [i for i in range(1, grid - 1) if ys[i] > ys[i - 1] and ys[i] >= ys[i + 1]]
    if ys[0] > ys[1]:
        peaks.insert(0, 0)
    if ys[-1] > ys[-2]:
        peaks.append(grid - 1)
    top = ys.max()
    peaks = [p for p in peaks if ys[p] >= min_height * top]
    kept = peaks[:1]
    for p in peaks[1:]:
        q = kept[-1]
        trough = ys[q : p + 1].min()
        if trough < max_dip * min(ys[p], ys[q]):
            kept.append(p)
        elif ys[p] > ys[q]:
            kept[-1] = p
    out["n_modes"] = len(kept)
    out["modes"] = [float(xs[p]) for p in kept]
    out["bimodal"] = len(kept) >= 2
    return out


def areal_ratio(d_new, d_old):
    """Ratio of disc areas ``pi d_new^2 / pi d_old^2``."""
    return (d_new / d_old) ** 2


@dataclass(frozen=True, eq=False)
class EndpointEstimate:
    d_hat: float | None
    crossing_sample: np.ndarray
    ci: ConfidenceInterval
    proportion_used: float
    skew: dict
    counts: dict
    bimodality: dict
    warnings: list = field(default_factory=list)

    @property
    def ci_method(self):
        return self.ci.method


def estimate_range(
    cs,
    rule: RelatednessRule,
    bands,
    method="mmpsb",
    N=2500,
    rng: RngPolicy | None = None,
    ci_method="bca",
    coverage=0.95,
    threads=None,
    nonfinite="propagate",
):
    """Point estimate, bootstrap run and endpoint interval in one call.

    Returns
    -------
    (EndpointEstimate, BootstrapRun, TauCurve)
    """
    rng = rng if rng is not None else RngPolicy(0)
    pt = build_pair_table(cs, rule)
    curve = tau_odds(band_counts(pt, bands), bands, rule)
    d_hat = estimate_endpoint(curve)
    run = run_bootstrap(cs, rule, bands, method, N, rng, threads=threads, nonfinite=nonfinite, pair_table=pt)
    est = summarise_crossings(d_hat, run, ci_method, coverage)
    return est, run, curve


def summarise_crossings(d_hat, run: BootstrapRun, ci_method="bca", coverage=0.95) -> EndpointEstimate:
    sample = extract_crossings(run)
    notes = []
    if ci_method.lower() == "bca":
        if d_hat is None:
            raise ValidationError("BCa needs a point estimate, but the point estimate never crosses tau = 1")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ci = bca_ci(sample.values, d_hat, coverage)
        for w in caught:
            notes.append(str(w.message))
            warnings.warn(w.message, w.category, stacklevel=2)
    elif ci_method.lower() == "percentile":
        ci = percentile_ci(sample.values, coverage)
    else:
        raise ValidationError(f"unknown CI method {ci_method!r}")
    if sample.proportion_used < 1:
        msg = (
            f"only {sample.proportion_used:.1%} of bootstrap replicates cross tau = 1; "
            "the interval is conditional on crossing and may under-cover"
        )
        notes.append(msg)
        warnings.warn(msg, ProportionUsedWarning, stacklevel=2)
    modes = bimodality(sample.values)
    if modes["bimodal"]:
        msg = f"crossing sample looks multimodal (modes near {', '.join(f'{m:.1f}' for m in modes['modes'])} m)"
        notes.append(msg)
        warnings.warn(msg, BimodalityWarning, stacklevel=2)
    return EndpointEstimate(
        d_hat=d_hat,
        crossing_sample=sample.values,
        ci=ci,
        proportion_used=sample.proportion_used,
        skew=skew_summary(sample.values, d_hat),
        counts=sample.counts(),
        bimodality=modes,
        warnings=notes,
    )


def calibrate_window(cs, bands, target, t_max=21, directional=(True, False), tol=None):
    """Scan integer relatedness windows ``[T1, T2]`` for a target endpoint.

    Every window with ``0 <= T1 <= T2 <= t_max`` is tried for each
    directionality. Returns ``(rule, d_hat)`` pairs ordered by distance
    from ``target``; windows whose curve never crosses are omitted. With
    ``tol`` only windows within ``tol`` of the target are kept.
    """
    pt0 = build_pair_table(cs, RelatednessRule(0, 0, True))
    out = []
    for direc in directional:
        for t1, t2 in itertools.combinations_with_replacement(range(int(t_max) + 1), 2):
            rule = RelatednessRule(float(t1), float(t2), direc)
            z = rule.related(cs.onset[pt0.i], cs.onset[pt0.j])
            counts = band_counts(pt0, bands, z=z)
            try:
                curve = tau_odds(counts, bands, rule)
            except DegenerateBackgroundOdds:
                continue
            d = estimate_endpoint(curve)
            if d is None:
                continue
            if tol is None or abs(d - target) <= tol:
                out.append((rule, d))
    out.sort(key=lambda rd: (abs(rd[1] - target), rd[0].t_upper - rd[0].t_lower, rd[0].t_lower))
    return out
