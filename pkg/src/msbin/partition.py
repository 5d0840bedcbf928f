"""Hierarchical dyadic partitions of a one-dimensional event domain."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Domain",
    "PartitionTree",
    "build_equal_width",
    "build_equal_count",
    "descendants",
]


@dataclass(frozen=True)
class Domain:
    """Half-open interval [lo, hi) on which events live."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("domain endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"domain requires lo < hi, got [{self.lo}, {self.hi})")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lo) & (x < self.hi)


class PartitionTree:
    """Nested dyadic binning of a domain, levels 0..R.

    Level r splits the domain into 2**r half-open bins; bin (r, l) for
    l = 1..2**r is always a sub-interval of bin (r-1, ceil(l/2)).
    Immutable after construction.
    """

    def __init__(self, domain: Domain, boundaries: list[np.ndarray]):
        if len(boundaries) < 2:
            raise ValueError("need at least one level below the root")
        self.domain = domain
        self._boundaries = []
        for r, bnd in enumerate(boundaries):
            bnd = np.asarray(bnd, dtype=float)
            if bnd.shape != (2**r + 1,):
                raise ValueError(f"level {r} must have {2**r + 1} boundaries")
            if bnd[0] != domain.lo or bnd[-1] != domain.hi:
                raise ValueError("level boundaries must span the domain")
            if np.any(np.diff(bnd) <= 0):
                raise ValueError(f"level {r} boundaries are not strictly increasing")
            self._boundaries.append(bnd)
        for r in range(1, len(self._boundaries)):
            if not np.all(np.isin(self._boundaries[r - 1], self._boundaries[r])):
                raise ValueError(f"level {r} does not refine level {r - 1}")

    @property
    def levels(self) -> int:
        """Maximum resolution level R."""
        return len(self._boundaries) - 1

    def boundaries(self, r: int) -> np.ndarray:
        self._check_level(r)
        return self._boundaries[r].copy()

    def region(self, r: int, l: int) -> tuple[float, float]:
        """Endpoints [lo, hi) of bin l (1-based) at level r."""
        self._check_level(r)
        if not 1 <= l <= 2**r:
            raise ValueError(f"bin index {l} out of range at level {r}")
        bnd = self._boundaries[r]
        return float(bnd[l - 1]), float(bnd[l])

    def locate(self, x, r: int):
        """1-based bin index of each position x at level r."""
        self._check_level(r)
        x_arr = np.asarray(x, dtype=float)
        if not np.all(self.domain.contains(x_arr)):
            raise ValueError("position outside the domain")
        idx = np.searchsorted(self._boundaries[r], x_arr, side="right")
        if np.isscalar(x) or x_arr.ndim == 0:
            return int(idx)
        return idx.astype(np.int64)

    def _check_level(self, r: int):
        if not 0 <= r <= self.levels:
            raise ValueError(f"level {r} outside 0..{self.levels}")

    def to_json_dict(self) -> dict:
        return {"R": self.levels, "boundaries": [b.tolist() for b in self._boundaries]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PartitionTree":
        bnds = [np.asarray(b, dtype=float) for b in obj["boundaries"]]
        dom = Domain(float(bnds[0][0]), float(bnds[0][-1]))
        return cls(dom, bnds)


def build_equal_width(domain: Domain, levels: int) -> PartitionTree:
    """Partition by recursive halving; every level-r bin has width |domain|/2**r."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    bnds = []
    for r in range(levels + 1):
        b = domain.lo + (domain.hi - domain.lo) * np.arange(2**r + 1) / 2**r
        b[0], b[-1] = domain.lo, domain.hi
        bnds.append(b)
    return PartitionTree(domain, bnds)


def build_equal_count(positions, domain: Domain, levels: int) -> PartitionTree:
    """Partition so each split sends floor(k/2) of its k points left.

    The split boundary is the midpoint between the two order statistics that
    straddle the split (domain edges stand in when a side is empty); a parent
    with no points splits at its geometric midpoint.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    pts = np.sort(np.asarray(positions, dtype=float))
    if pts.size and not np.all(domain.contains(pts)):
        raise ValueError("position outside the domain")

    bnds = [np.array([domain.lo, domain.hi])]
    for _ in range(levels):
        parents = bnds[-1]
        child = np.empty(2 * (parents.size - 1) + 1)
        child[::2] = parents
        for i in range(parents.size - 1):
            a, b = parents[i], parents[i + 1]
            seg = pts[(pts >= a) & (pts < b)]
            k = seg.size
            if k == 0:
                cut = 0.5 * (a + b)
            else:
                nl = k // 2
                left_nb = seg[nl - 1] if nl >= 1 else a
                right_nb = seg[nl] if nl < k else b
                cut = 0.5 * (left_nb + right_nb)
                if not a < cut < b:
                    # ties or points on the edge; degrade to the midpoint
                    cut = 0.5 * (a + b)
            if not a < cut < b:
                # interval too narrow to hold any representable cut
                raise ValueError(
                    f"cannot split [{a}, {b}): positions too concentrated "
                    f"for {levels} levels")
            child[2 * i + 1] = cut
        bnds.append(child)
    return PartitionTree(domain, bnds)


def descendants(s: int, j: int, r: int) -> np.ndarray:
    """1-based indices at level r of the bins partitioning bin (s, j)."""
    if s < 0 or r < s:
        raise ValueError(f"need 0 <= s <= r, got s={s}, r={r}")
    if not 1 <= j <= 2**s:
        raise ValueError(f"bin index {j} out of range at level {s}")
    width = 2 ** (r - s)
    return np.arange(width * (j - 1) + 1, width * j + 1, dtype=np.int64)
