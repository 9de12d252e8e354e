"""Synthetic household epidemics for demos and tests.

The generator is a crude spatial chain binomial on households scattered in
a rectangle. It produces clustering at short range and is NOT a stand-in
for any real dataset.
"""
from __future__ import annotations

import numpy as np

from .core import CaseSet, RngPolicy

__all__ = ["household_epidemic", "random_case_set"]


def household_epidemic(
    n_cases=188,
    seed=0,
    n_households=160,
    width=280.0,
    height=240.0,
    children_per_household=1.8,
    beta_household=0.6,
    beta_spatial=0.4,
    kernel_scale=12.0,
    serial_mean=11.0,
    serial_sd=2.5,
    max_attempts=500,
):
    """Simulate an epidemic and return its first ``n_cases`` cases by onset.

    Onsets are integer days. Cases in the same household share coordinates.
    The simulation is restarted with a new index case until at least
    ``n_cases`` infections occur, giving up after ``max_attempts`` tries.
    """
    attempt = 0
    while True:
        gen = RngPolicy(seed).generator("synthetic", attempt)
        hx = gen.uniform(0, width, n_households)
        hy = gen.uniform(0, height, n_households)
        sizes = 1 + gen.poisson(children_per_household, n_households)
        home = np.repeat(np.arange(n_households), sizes)
        m = home.size
        px, py = hx[home], hy[home]
        d = np.hypot(px[:, None] - px[None, :], py[:, None] - py[None, :])
        force = beta_spatial * np.exp(-d / kernel_scale) / (1 + d / kernel_scale)
        force[home[:, None] == home[None, :]] = beta_household
        np.fill_diagonal(force, 0.0)
        onset = np.full(m, np.inf)
        first = gen.integers(m)
        onset[first] = 0.0
        frontier = [first]
        while frontier:
            nxt = []
            for i in frontier:
                sus = ~np.isfinite(onset)
                hit = sus & (gen.random(m) < force[i])
                for j in np.flatnonzero(hit):
                    onset[j] = onset[i] + max(1.0, round(gen.normal(serial_mean, serial_sd)))
                    nxt.append(j)
            frontier = nxt
        cases = np.flatnonzero(np.isfinite(onset))
        if cases.size >= n_cases:
            order = cases[np.argsort(onset[cases], kind="stable")][:n_cases]
            ids = [f"S{k + 1}" for k in range(n_cases)]
            return CaseSet(ids, px[order], py[order], onset[order])
        attempt += 1
        if attempt >= max_attempts:
            raise RuntimeError(f"no outbreak reached {n_cases} cases in {max_attempts} attempts")


def random_case_set(gen: np.random.Generator, n, extent=100.0, onset_range=30, lattice=False):
    """Uniformly scattered cases with integer onsets.

    With ``lattice=True`` coordinates are integers, which produces exact
    distance ties (including band-edge ties) and co-located cases.
    """
    if lattice:
        x = gen.integers(0, int(extent) // 5, n) * 5.0
        y = gen.integers(0, int(extent) // 5, n) * 5.0
    else:
        x = gen.uniform(0, extent, n)
        y = gen.uniform(0, extent, n)
    t = gen.integers(0, onset_range, n).astype(float)
    return CaseSet([f"c{k}" for k in range(n)], x, y, t)
