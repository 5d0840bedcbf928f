"""Point-process realizations: representation, Poisson simulation, binning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .partition import Domain, PartitionTree

__all__ = ["PointPattern", "IntensitySpec", "sample_poisson", "bin_counts"]


@dataclass(frozen=True)
class PointPattern:
    """Sorted event positions inside a domain."""

    events: np.ndarray
    domain: Domain

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float)
        if ev.ndim != 1:
            raise ValueError("events must be one-dimensional")
        if ev.size and np.any(np.diff(ev) < 0):
            ev = np.sort(ev)
        if ev.size and not np.all(self.domain.contains(ev)):
            raise ValueError("event outside the domain")
        object.__setattr__(self, "events", ev)

    def __len__(self) -> int:
        return int(self.events.size)


@dataclass(frozen=True)
class IntensitySpec:
    """Nonnegative rate function with a known upper bound.

    `kind` is one of constant / piecewise / scaled-beta / sinusoid / callable;
    the factory classmethods fill in `params` and `lam_max` consistently.
    """

    kind: str
    lam_max: float
    params: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, level: float) -> "IntensitySpec":
        if level < 0:
            raise ValueError("intensity must be nonnegative")
        return cls("constant", float(level), {"level": float(level)})

    @classmethod
    def piecewise(cls, breaks, values) -> "IntensitySpec":
        breaks = np.asarray(breaks, dtype=float)
        values = np.asarray(values, dtype=float)
        if breaks.size != values.size + 1 or np.any(np.diff(breaks) <= 0):
            raise ValueError("need increasing breaks with one value per piece")
        if np.any(values < 0):
            raise ValueError("intensity must be nonnegative")
        return cls("piecewise", float(values.max(initial=0.0)),
                   {"breaks": breaks, "values": values})

    @classmethod
    def scaled_beta(cls, mass: float, a: float = 2.0, b: float = 5.0) -> "IntensitySpec":
        """mass * Beta(a, b) density on [0, 1]."""
        from scipy.special import betaln

        if mass < 0:
            raise ValueError("mass must be nonnegative")
        mode = (a - 1.0) / (a + b - 2.0) if a > 1 and b > 1 else 0.5
        log_norm = -betaln(a, b)
        peak = mass * np.exp(log_norm + (a - 1) * np.log(mode) + (b - 1) * np.log1p(-mode))
        return cls("scaled-beta", float(peak) * (1 + 1e-12),
                   {"mass": float(mass), "a": float(a), "b": float(b)})

    @classmethod
    def sinusoid(cls, base: float, amp: float, omega: float, phase: float = 0.0,
                 window: tuple[float, float] | None = None) -> "IntensitySpec":
        """base + amp*sin(omega*(x - phase)), restricted to `window` if given."""
        if base - abs(amp) < 0:
            raise ValueError("intensity must be nonnegative")
        return cls("sinusoid", float(base + abs(amp)),
                   {"base": float(base), "amp": float(amp), "omega": float(omega),
                    "phase": float(phase), "window": window})

    @classmethod
    def from_callable(cls, fn: Callable, lam_max: float) -> "IntensitySpec":
        return cls("callable", float(lam_max), {"fn": fn})

    def rate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["level"])
        if self.kind == "piecewise":
            idx = np.clip(np.searchsorted(p["breaks"], x, side="right") - 1,
                          0, p["values"].size - 1)
            out = p["values"][idx]
            out = np.where((x < p["breaks"][0]) | (x >= p["breaks"][-1]), 0.0, out)
            return out
        if self.kind == "scaled-beta":
            from scipy.stats import beta as beta_dist

            out = p["mass"] * beta_dist.pdf(x, p["a"], p["b"])
            return np.where((x < 0) | (x > 1), 0.0, out)
        if self.kind == "sinusoid":
            out = np.full_like(x, p["base"])
            if p["window"] is None:
                return out + p["amp"] * np.sin(p["omega"] * (x - p["phase"]))
            w0, w1 = p["window"]
            inside = (x >= w0) & (x <= w1)
            bump = p["amp"] * np.sin(p["omega"] * (x - p["phase"]))
            return np.where(inside, out + bump, out)
        if self.kind == "callable":
            return np.asarray(p["fn"](x), dtype=float)
        raise ValueError(f"unknown intensity kind {self.kind!r}")


def sample_poisson(intensity: IntensitySpec, domain: Domain,
                   rng: np.random.Generator) -> PointPattern:
    """Draw one realization of an (in)homogeneous Poisson process by thinning."""
    lam_max = intensity.lam_max
    if lam_max < 0:
        raise ValueError("lam_max must be nonnegative")
    if lam_max == 0.0:
        return PointPattern(np.empty(0), domain)
    n_cand = rng.poisson(lam_max * domain.width)
    xs = domain.lo + domain.width * rng.random(n_cand)
    rates = intensity.rate(xs)
    if np.any(rates > lam_max * (1 + 1e-9)):
        raise ValueError("intensity exceeds its declared upper bound")
    keep = rng.random(n_cand) * lam_max < rates
    return PointPattern(np.sort(xs[keep]), domain)


def bin_counts(pattern: PointPattern, tree: PartitionTree, r: int) -> np.ndarray:
    """Event counts per level-r bin; sums to the pattern size."""
    if not (tree.domain.lo <= pattern.domain.lo and pattern.domain.hi <= tree.domain.hi):
        raise ValueError("pattern domain is not covered by the partition")
    if len(pattern) == 0:
        return np.zeros(2**r, dtype=np.int64)
    idx = tree.locate(pattern.events, r)
    return np.bincount(np.asarray(idx) - 1, minlength=2**r).astype(np.int64)
