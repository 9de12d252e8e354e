"""Shared domain types: cases, relatedness rules, distance bands, tau curves.

Everything here is immutable after construction so it can be handed to
worker threads without copying.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DuplicateId, EmptyOrSingleton, NonFiniteField, ValidationError

__all__ = [
    "CaseRecord",
    "CaseSet",
    "RelatednessRule",
    "DistanceBand",
    "DistanceBandSet",
    "TauCurve",
    "RngPolicy",
    "validate_case_set",
]


class CaseRecord(NamedTuple):
    id: str
    x: float
    y: float
    onset: float


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class CaseSet:
    """An ordered, validated collection of geolocated cases.

    Coordinates are planar metres and onsets are days. Duplicate locations
    and duplicate onsets are both allowed; ids must be unique.
    """

    __slots__ = ("ids", "x", "y", "onset")

    def __init__(self, ids, x, y, onset):
        ids = tuple(str(i) for i in ids)
        x = _readonly(x)
        y = _readonly(y)
        onset = _readonly(onset)
        n = len(ids)
        if not (len(x) == len(y) == len(onset) == n):
            raise ValidationError("ids, x, y and onset must have equal length")
        if n < 2:
            raise EmptyOrSingleton(f"need at least 2 cases for a pairwise statistic, got {n}")
        for name, arr in (("x", x), ("y", y), ("onset", onset)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise NonFiniteField(f"non-finite {name} for case {ids[bad[0]]!r}")
        if len(set(ids)) != n:
            seen = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise DuplicateId(f"duplicate case id {dup!r}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "onset", onset)

    def __setattr__(self, name, value):
        raise AttributeError("CaseSet is immutable")

    @classmethod
    def from_records(cls, records: Iterable) -> "CaseSet":
        records = [CaseRecord(*r) if not isinstance(r, CaseRecord) else r for r in records]
        if not records:
            raise EmptyOrSingleton("need at least 2 cases for a pairwise statistic, got 0")
        ids, x, y, t = zip(*records)
        return cls(ids, x, y, t)

    @property
    def n(self) -> int:
        return len(self.ids)

    def __len__(self):
        return self.n

    @property
    def cases(self) -> list[CaseRecord]:
        return [
            CaseRecord(i, float(a), float(b), float(t))
            for i, a, b, t in zip(self.ids, self.x, self.y, self.onset)
        ]

    @property
    def coords(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def with_onsets(self, onset) -> "CaseSet":
        """Return a copy with the same locations and ids but new onset times."""
        return CaseSet(self.ids, self.x, self.y, onset)

    def take(self, indices) -> "CaseSet":
        indices = np.asarray(indices)
        ids = [f"{self.ids[i]}#{k}" for k, i in enumerate(indices)]
        return CaseSet(ids, self.x[indices], self.y[indices], self.onset[indices])

    def __eq__(self, other):
        if not isinstance(other, CaseSet):
            return NotImplemented
        return (
            self.ids == other.ids
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.onset, other.onset)
        )

    def __repr__(self):
        return f"CaseSet(n={self.n})"


def validate_case_set(raw: Sequence) -> CaseSet:
    """Validate a list of ``CaseRecord``-like tuples into a CaseSet.

    Integer onsets are widened to float; ordering is preserved.
    """
    return CaseSet.from_records(raw)


@dataclass(frozen=True)
class RelatednessRule:
    """Temporal relatedness of an ordered case pair.

    With ``directional=True`` the pair (i, j) is related when
    ``t_lower <= t_j - t_i <= t_upper``; otherwise when
    ``t_lower <= |t_j - t_i| <= t_upper``.
    """

    t_lower: float
    t_upper: float
    directional: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.t_lower) and math.isfinite(self.t_upper)):
            raise ValidationError("relatedness bounds must be finite")
        if self.t_lower > self.t_upper:
            raise ValidationError(
                f"t_lower ({self.t_lower}) must not exceed t_upper ({self.t_upper})"
            )

    def related(self, t_i, t_j):
        """Vectorised z_ij for onset arrays ``t_i`` and ``t_j``."""
        dt = np.subtract(t_j, t_i)
        if not self.directional:
            dt = np.abs(dt)
        return (dt >= self.t_lower) & (dt <= self.t_upper)

    def to_dict(self):
        return {
            "t_lower": float(self.t_lower),
            "t_upper": float(self.t_upper),
            "directional": bool(self.directional),
        }


@dataclass(frozen=True)
class DistanceBand:
    """Half-closed annulus ``[d_low, d_high)`` in metres."""

    d_low: float
    d_high: float

    def __post_init__(self):
        if not (self.d_low >= 0 and self.d_low < self.d_high):
            raise ValidationError(f"invalid band [{self.d_low}, {self.d_high})")

    def contains(self, d) -> bool:
        return self.d_low <= d < self.d_high

    @property
    def midpoint(self) -> float:
        return (self.d_low + self.d_high) / 2


class DistanceBandSet:
    """Ordered set of half-closed distance bands; overlap is permitted.

    Midpoints must be strictly increasing so that a tau curve can be read
    as a function of distance. A band with ``d_high = inf`` has an infinite
    midpoint and is only allowed as the last band.
    """

    __slots__ = ("lows", "highs")

    def __init__(self, bands):
        bands = [b if isinstance(b, DistanceBand) else DistanceBand(*b) for b in bands]
        if not bands:
            raise ValidationError("a band set needs at least one band")
        lows = _readonly([b.d_low for b in bands])
        highs = _readonly([b.d_high for b in bands])
        mids = (lows + highs) / 2
        if len(mids) > 1 and not np.all(np.diff(mids) > 0):
            raise ValidationError("band midpoints must be strictly increasing")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    def __setattr__(self, name, value):
        raise AttributeError("DistanceBandSet is immutable")

    @classmethod
    def overlapping(cls, first=10.0, step=2.0, width=50.0, last_low=74.0):
        """Expanding discs ``[0, first), [0, first+step), ..., [0, width)``
        followed by sliding annuli ``[step, width+step), ..., [last_low, last_low+width)``.

        The defaults give the 58-band set used for the Hagelloch analyses.
        """
        bands = [(0.0, float(h)) for h in np.arange(first, width + step / 2, step)]
        bands += [(float(lo), float(lo + width)) for lo in np.arange(step, last_low + step / 2, step)]
        return cls(bands)

    @classmethod
    def non_overlapping(cls, edges=None):
        """Contiguous bands between consecutive ``edges``.

        Default edges are ``0, 7, 15, 20, 25, ..., 200``.
        """
        if edges is None:
            edges = [0.0, 7.0] + [float(e) for e in range(15, 201, 5)]
        edges = [float(e) for e in edges]
        return cls(list(zip(edges[:-1], edges[1:])))

    @property
    def bands(self) -> list[DistanceBand]:
        return [DistanceBand(float(a), float(b)) for a, b in zip(self.lows, self.highs)]

    @property
    def midpoints(self) -> np.ndarray:
        return (self.lows + self.highs) / 2

    def __len__(self):
        return len(self.lows)

    def __eq__(self, other):
        if not isinstance(other, DistanceBandSet):
            return NotImplemented
        return np.array_equal(self.lows, other.lows) and np.array_equal(self.highs, other.highs)

    def __hash__(self):
        return hash((self.lows.tobytes(), self.highs.tobytes()))

    def scaled(self, c: float) -> "DistanceBandSet":
        return DistanceBandSet(list(zip(self.lows * c, self.highs * c)))

    def to_list(self):
        return [[float(a), float(b)] for a, b in zip(self.lows, self.highs)]

    def __repr__(self):
        return f"DistanceBandSet({len(self)} bands, {self.lows[0]:g}..{self.highs[-1]:g} m)"


@dataclass(frozen=True, eq=False)
class TauCurve:
    """Tau values over a band set.

    Undefined bands (no unrelated pairs) hold NaN. MPSB replicates may also
    hold ``inf``; both count as unusable for interpolation and crossings.
    """

    bands: DistanceBandSet
    values: np.ndarray
    rule: RelatednessRule | None = None
    provenance: str = "point estimate"

    def __post_init__(self):
        values = _readonly(self.values)
        if values.shape != (len(self.bands),):
            raise ValidationError(
                f"expected {len(self.bands)} tau values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def midpoints(self) -> np.ndarray:
        return self.bands.midpoints

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __len__(self):
        return len(self.values)


_STREAMS = {"permutation": 1, "bootstrap": 2, "jitter": 3, "synthetic": 4}


@dataclass(frozen=True)
class RngPolicy:
    """Deterministic per-replicate random streams.

    Replicate ``k`` of a given stream always draws from the generator seeded
    by ``SeedSequence(master_seed, spawn_key=(stream, k))``, so results do
    not depend on how replicates are distributed over threads.
    """

    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValidationError("master_seed must fit in 64 unsigned bits")

    def generator(self, stream: str, index: int = 0) -> np.random.Generator:
        key = (_STREAMS[stream], int(index))
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.master_seed), spawn_key=key)))
