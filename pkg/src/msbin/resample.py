"""Null-resampling engines for networks: uniform pair-mark resampling and the
degree-conditioned Metropolis-Hastings rewiring chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EdgeMarkSequence",
    "uniform_pair_resample",
    "uniform_bipartite_resample",
    "mh_step",
    "mh_run",
    "mh_run_batched",
    "degree_vector",
]


@dataclass(frozen=True)
class EdgeMarkSequence:
    """Ordered node-pair marks aligned with pooled event positions.

    Symmetric sequences store u < v; bipartite sequences index the two sides
    separately, so u == v is allowed there.
    """

    u: np.ndarray
    v: np.ndarray
    bipartite: bool = False

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be aligned 1-d arrays")
        if not self.bipartite:
            if np.any(u == v):
                raise ValueError("marks must join two distinct nodes")
            u, v = np.minimum(u, v), np.maximum(u, v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return int(self.u.size)


def uniform_pair_resample(seq: EdgeMarkSequence, n: int,
                          rng: np.random.Generator) -> EdgeMarkSequence:
    """Each mark redrawn iid uniform over the n*(n-1)/2 unordered pairs."""
    if seq.bipartite:
        raise ValueError("sequence is bipartite; use uniform_bipartite_resample")
    if n < 2:
        raise ValueError("need at least two nodes")
    iu, iv = np.triu_indices(n, k=1)
    idx = rng.integers(0, iu.size, size=len(seq))
    return EdgeMarkSequence(iu[idx], iv[idx])


def uniform_bipartite_resample(seq: EdgeMarkSequence, m: int, n: int,
                               rng: np.random.Generator) -> EdgeMarkSequence:
    """Each mark redrawn iid uniform over the m*n cross-group pairs."""
    if m < 1 or n < 1:
        raise ValueError("both sides need at least one node")
    idx = rng.integers(0, m * n, size=len(seq))
    return EdgeMarkSequence(idx // n, idx % n, bipartite=True)


def _proposal(a, b, c, d, outcome):
    """Proposed replacement pairs for marks (a,b) and (c,d)."""
    if outcome == 0:
        return (c, d), (a, b)
    if outcome == 1:
        return (a, d), (c, b)
    if outcome == 2:
        return (c, b), (a, d)
    if outcome == 3:
        return (a, c), (b, d)
    return (b, d), (a, c)


def _step_inplace(u: np.ndarray, v: np.ndarray, rng: np.random.Generator) -> bool:
    """One rewiring step; returns True when the proposal is accepted.

    Picks an unordered index pair i < j and one of five endpoint rewirings
    uniformly; proposals creating a self-pair are rejected, otherwise the
    acceptance ratio is exactly one. Node degrees are preserved either way.
    """
    n = u.size
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    outcome = int(rng.integers(5))
    mi, mj = _proposal(int(u[i]), int(v[i]), int(u[j]), int(v[j]), outcome)
    if mi[0] == mi[1] or mj[0] == mj[1]:
        return False
    u[i], v[i] = min(mi), max(mi)
    u[j], v[j] = min(mj), max(mj)
    return True


def mh_step(seq: EdgeMarkSequence, rng: np.random.Generator) -> EdgeMarkSequence:
    """One Metropolis-Hastings step on the degree-conditioned mark chain."""
    if seq.bipartite:
        raise ValueError("degree-conditioned chain is symmetric-only")
    if len(seq) < 2:
        raise ValueError("need at least two marks")
    u, v = seq.u.copy(), seq.v.copy()
    _step_inplace(u, v, rng)
    return EdgeMarkSequence(u, v)


def mh_run(seq: EdgeMarkSequence, steps: int,
           rng: np.random.Generator) -> EdgeMarkSequence:
    """Apply `steps` chain steps (rejections count as steps)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0 or len(seq) < 2:
        return seq
    u, v = seq.u.copy(), seq.v.copy()
    for _ in range(steps):
        _step_inplace(u, v, rng)
    return EdgeMarkSequence(u, v)


def mh_run_batched(seq: EdgeMarkSequence, supersteps: int,
                   rng: np.random.Generator) -> EdgeMarkSequence:
    """Vectorized chain variant: each superstep pairs the mark indices into
    floor(N/2) disjoint couples and applies one rewiring proposal to every
    couple at once. Moves on disjoint couples commute, each is individually
    symmetric with acceptance ratio one, so the uniform degree-conditioned
    distribution is still stationary. One superstep mixes roughly like N/2
    single steps."""
    if supersteps < 0:
        raise ValueError("supersteps must be >= 0")
    n = len(seq)
    if supersteps == 0 or n < 2:
        return seq
    u, v = seq.u.copy(), seq.v.copy()
    half = n // 2
    for _ in range(supersteps):
        perm = rng.permutation(n)
        ii, jj = perm[:half], perm[half:2 * half]
        out = rng.integers(5, size=half)
        a, b, c, d = u[ii], v[ii], u[jj], v[jj]
        mi0 = np.choose(out, [c, a, c, a, b])
        mi1 = np.choose(out, [d, d, b, c, d])
        mj0 = np.choose(out, [a, c, a, b, a])
        mj1 = np.choose(out, [b, b, d, d, c])
        ok = (mi0 != mi1) & (mj0 != mj1)
        ai, aj = ii[ok], jj[ok]
        u[ai] = np.minimum(mi0[ok], mi1[ok])
        v[ai] = np.maximum(mi0[ok], mi1[ok])
        u[aj] = np.minimum(mj0[ok], mj1[ok])
        v[aj] = np.maximum(mj0[ok], mj1[ok])
    return EdgeMarkSequence(u, v)


def degree_vector(seq: EdgeMarkSequence, n: int) -> np.ndarray:
    """Per-node mark incidence counts; sums to 2N on symmetric sequences."""
    if len(seq) and max(seq.u.max(), seq.v.max()) >= n:
        raise ValueError("node index out of range")
    return np.bincount(np.concatenate([seq.u, seq.v]), minlength=n).astype(np.int64)
