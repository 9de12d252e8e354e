"""Optional SVG renderings. Requires matplotlib (``pip install artifact[plot]``)."""
from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "taustat"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()


def envelope_figure(result, path):
    plt = _pyplot()
    mids = result.observed.midpoints
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(mids, result.lower, result.upper, color="0.85", label="global null envelope")
    ax.plot(mids, result.median, color="0.4", lw=1, ls="--", label="median simulation")
    ax.plot(mids, result.observed.values, color="tab:blue", lw=2, label="tau estimate")
    ax.axhline(1, color="tab:red", lw=1)
    for r in result.exceedance:
        ax.axvspan(r.d_from, r.d_to, color="tab:orange" if r.kind == "above" else "tab:purple", alpha=0.15)
    lo, hi = result.p_interval
    ax.set_title(f"extreme rank envelope, p in [{lo:.3g}, {hi:.3g}]")
    ax.set_xlabel("distance band midpoint (m)")
    ax.set_ylabel("tau")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
    plt.close(fig)


def range_figure(curve, lower, upper, estimate, path):
    plt = _pyplot()
    mids = curve.midpoints
    fig, (ax, hx) = plt.subplots(2, 1, figsize=(7, 6), sharex=True, gridspec_kw={"height_ratios": [2, 1]})
    ax.fill_between(mids, lower, upper, color="0.85", label="bootstrap central envelope")
    ax.plot(mids, curve.values, color="tab:blue", lw=2, label="tau estimate")
    ax.axhline(1, color="tab:red", lw=1)
    if estimate.d_hat is not None:
        ax.axvline(estimate.d_hat, color="tab:red", ls=":")
    ax.set_ylabel("tau")
    ax.legend(frameon=False, fontsize=8)
    hx.hist(estimate.crossing_sample, bins=40, color="0.6")
    hx.axvline(estimate.skew["mean"], color="tab:green", ls=":", label="mean")
    hx.axvline(estimate.skew["median"], color="tab:blue", ls=":", label="median")
    hx.hlines(0, estimate.ci.low, estimate.ci.high, color="purple", lw=4, label=f"{estimate.ci.method} CI")
    hx.set_xlabel("distance (m)")
    hx.legend(frameon=False, fontsize=8)
    _save(fig, path)
    plt.close(fig)


def epicurve_figure(days, counts, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.bar(days, counts, width=1.0, color="0.4")
    ax.set_xlabel("onset day")
    ax.set_ylabel("cases")
    _save(fig, path)
    plt.close(fig)


def spacetime_figure(x, y, onset, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 5))
    sc = ax.scatter(x, y, c=onset, s=12, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="onset day")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _save(fig, path)
    plt.close(fig)
