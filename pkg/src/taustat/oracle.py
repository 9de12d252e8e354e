"""Brute-force reference implementations.

Direct loops over the defining sums, written for obviousness rather than
speed. They deliberately avoid numpy and the optimized code paths so that
tests comparing the two are meaningful. Only suitable for small inputs.
"""
from __future__ import annotations

import math
from statistics import NormalDist

__all__ = [
    "oracle_related",
    "oracle_band_counts",
    "oracle_mark_counts",
    "oracle_tau",
    "oracle_mmpsb",
    "oracle_mpsb",
    "oracle_risb",
    "oracle_envelope_ranks",
    "oracle_pointwise_ranks",
    "oracle_quantile",
    "oracle_bca",
    "oracle_first_down_crossing",
]


def _dist(cs, i, j):
    # same operation order as the vectorised kernel so boundary ties agree
    dx = float(cs.x[i]) - float(cs.x[j])
    dy = float(cs.y[i]) - float(cs.y[j])
    return math.sqrt(dx * dx + dy * dy)


def oracle_related(rule, t_i, t_j):
    dt = t_j - t_i
    if not rule.directional:
        dt = abs(dt)
    return rule.t_lower <= dt <= rule.t_upper


def _bands(bands):
    return [(float(a), float(b)) for a, b in zip(bands.lows, bands.highs)]


def oracle_band_counts(cs, rule, bands):
    """Returns ``(related, unrelated, total_related, total_unrelated)`` as lists/ints."""
    n = cs.n
    rel, unrel = [], []
    for lo, hi in _bands(bands):
        r = u = 0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                d = _dist(cs, i, j)
                if lo <= d < hi:
                    if oracle_related(rule, float(cs.onset[i]), float(cs.onset[j])):
                        r += 1
                    else:
                        u += 1
        rel.append(r)
        unrel.append(u)
    tr = tu = 0
    for i in range(n):
        for j in range(n):
            if i != j:
                if oracle_related(rule, float(cs.onset[i]), float(cs.onset[j])):
                    tr += 1
                else:
                    tu += 1
    return rel, unrel, tr, tu


def oracle_mark_counts(cs, rule, bands):
    """Per-case counts ``m_i(band, k)``; returns (related, unrelated, tot_rel, tot_unrel)."""
    n = cs.n
    bl = _bands(bands)
    rel = [[0] * len(bl) for _ in range(n)]
    unrel = [[0] * len(bl) for _ in range(n)]
    trel = [0] * n
    tunrel = [0] * n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = _dist(cs, i, j)
            z = oracle_related(rule, float(cs.onset[i]), float(cs.onset[j]))
            if z:
                trel[i] += 1
            else:
                tunrel[i] += 1
            for b, (lo, hi) in enumerate(bl):
                if lo <= d < hi:
                    if z:
                        rel[i][b] += 1
                    else:
                        unrel[i][b] += 1
    return rel, unrel, trel, tunrel


def _ratio(r, u, tr, tu):
    if u == 0:
        return math.nan
    return (r * tu) / (u * tr)


def oracle_tau(cs, rule, bands):
    """List of tau values (NaN for bands without unrelated pairs)."""
    rel, unrel, tr, tu = oracle_band_counts(cs, rule, bands)
    if tr == 0 or tu == 0:
        raise ZeroDivisionError("background odds zero or undefined")
    return [_ratio(r, u, tr, tu) for r, u in zip(rel, unrel)]


def oracle_mmpsb(cs, rule, bands, indices):
    """Bootstrapped odds: sum each resampled case's marks against all cases."""
    n = cs.n
    bl = _bands(bands)
    rel = [0] * len(bl)
    unrel = [0] * len(bl)
    tr = tu = 0
    for i in indices:
        for j in range(n):
            if j == i:
                continue
            d = _dist(cs, i, j)
            z = oracle_related(rule, float(cs.onset[i]), float(cs.onset[j]))
            tr += z
            tu += not z
            for b, (lo, hi) in enumerate(bl):
                if lo <= d < hi:
                    if z:
                        rel[b] += 1
                    else:
                        unrel[b] += 1
    if tr == 0 or tu == 0:
        raise ZeroDivisionError("background odds zero or undefined")
    return [_ratio(r, u, tr, tu) for r, u in zip(rel, unrel)]


def _odds(r, u):
    if u == 0:
        return math.inf if r > 0 else math.nan
    return r / u


def _odds_ratio(theta, theta0):
    if math.isnan(theta) or math.isnan(theta0):
        return math.nan
    if theta0 == 0:
        return math.inf if theta > 0 else math.nan
    if math.isinf(theta0):
        return 0.0 if math.isfinite(theta) else math.nan
    return theta / theta0


def oracle_mpsb(cs, rule, bands, indices):
    """Mean over the multiset of local tau ratios; inf/NaN propagate."""
    rel, unrel, trel, tunrel = oracle_mark_counts(cs, rule, bands)
    out = []
    for b in range(len(bands)):
        s = 0.0
        for i in indices:
            s += _odds_ratio(_odds(rel[i][b], unrel[i][b]), _odds(trel[i], tunrel[i]))
        out.append(s / len(indices))
    return out


def oracle_risb(cs, rule, bands, indices):
    """Tau on the resampled data, over slot pairs ``p != q`` holding different cases."""
    bl = _bands(bands)
    rel = [0] * len(bl)
    unrel = [0] * len(bl)
    tr = tu = 0
    m = len(indices)
    for p in range(m):
        for q in range(m):
            a, b = indices[p], indices[q]
            if p == q or a == b:
                continue
            d = _dist(cs, a, b)
            z = oracle_related(rule, float(cs.onset[a]), float(cs.onset[b]))
            tr += z
            tu += not z
            for k, (lo, hi) in enumerate(bl):
                if lo <= d < hi:
                    if z:
                        rel[k] += 1
                    else:
                        unrel[k] += 1
    if tr == 0 or tu == 0:
        raise ZeroDivisionError("background odds zero or undefined")
    return [_ratio(r, u, tr, tu) for r, u in zip(rel, unrel)]


def oracle_pointwise_ranks(matrix):
    """Two-sided pointwise ranks; ties share the most extreme rank."""
    rows = [list(map(float, r)) for r in matrix]
    out = []
    for r in rows:
        ranks = []
        for k, x in enumerate(r):
            col = [row[k] for row in rows]
            below = sum(1 for v in col if v < x)
            above = sum(1 for v in col if v > x)
            ranks.append(min(below + 1, above + 1))
        out.append(ranks)
    return out


def oracle_envelope_ranks(matrix):
    """Extreme rank of each row: the minimum of its pointwise ranks."""
    return [min(r) for r in oracle_pointwise_ranks(matrix)]


def oracle_quantile(sample, p):
    """Linear interpolation between order statistics (Hyndman-Fan type 7)."""
    xs = sorted(float(v) for v in sample)
    h = (len(xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def oracle_bca(sample, point_estimate, coverage=0.95):
    """Textbook BCa interval with jackknife-of-the-sample acceleration."""
    nd = NormalDist()
    xs = [float(v) for v in sample]
    B = len(xs)
    z0 = nd.inv_cdf(sum(1 for v in xs if v < point_estimate) / B)
    total = math.fsum(xs)
    loo = [(total - v) / (B - 1) for v in xs]
    loo_mean = math.fsum(loo) / B
    num = math.fsum((loo_mean - v) ** 3 for v in loo)
    den = 6 * math.fsum((loo_mean - v) ** 2 for v in loo) ** 1.5
    a = num / den if den > 0 else 0.0
    alpha = (1 - coverage) / 2
    levels = []
    for q in (alpha, 1 - alpha):
        zq = nd.inv_cdf(q)
        levels.append(nd.cdf(z0 + (z0 + zq) / (1 - a * (z0 + zq))))
    return oracle_quantile(xs, levels[0]), oracle_quantile(xs, levels[1])


def oracle_first_down_crossing(mids, values, level=1.0):
    """First distance where a curve starting above ``level`` reaches it.

    Non-finite values are ignored. Returns None when the curve starts at or
    below the level or never reaches it.
    """
    pts = [(float(m), float(v)) for m, v in zip(mids, values) if math.isfinite(v)]
    if len(pts) < 2 or pts[0][1] <= level:
        return None
    for (m0, v0), (m1, v1) in zip(pts, pts[1:]):
        if v1 <= level:
            return m0 + (v0 - level) / (v0 - v1) * (m1 - m0)
    return None
