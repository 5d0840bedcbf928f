"""Independent oracles used across the test suite.

Everything here is deliberately naive (enumeration, brute-force sums, power
iteration) so it stays independent of the library code paths it checks.
"""

import itertools
import math

import numpy as np


def naive_binom_two_sided_tail(m: int, t: float) -> float:
    """Direct enumeration of P(|Bin(1/2, m) - m/2| >= t)."""
    total = 0.0
    for s in range(m + 1):
        if abs(s - m / 2.0) >= t:
            total += math.comb(m, s) / 2.0**m
    return total


def naive_eta(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=1) / math.sqrt(a.sum())


def naive_sgnt(a: np.ndarray) -> float:
    n = a.shape[0]
    eta = naive_eta(a)
    total = 0.0
    for u1, u2, u3 in itertools.permutations(range(n), 3):
        total += ((a[u1, u2] - eta[u1] * eta[u2])
                  * (a[u2, u3] - eta[u2] * eta[u3])
                  * (a[u3, u1] - eta[u3] * eta[u1]))
    return total


def naive_sgnq(a: np.ndarray) -> float:
    n = a.shape[0]
    eta = naive_eta(a)
    total = 0.0
    for u1, u2, u3, u4 in itertools.permutations(range(n), 4):
        total += ((a[u1, u2] - eta[u1] * eta[u2])
                  * (a[u2, u3] - eta[u2] * eta[u3])
                  * (a[u3, u4] - eta[u3] * eta[u4])
                  * (a[u4, u1] - eta[u4] * eta[u1]))
    return total


def power_iteration_top_eigenvalue(m: np.ndarray, iters: int = 20000) -> float:
    """Largest algebraic eigenvalue via shifted power iteration."""
    n = m.shape[0]
    shift = float(np.abs(m).sum(axis=1).max()) + 1.0
    shifted = m + shift * np.eye(n)
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = shifted @ v
        norm = np.linalg.norm(w)
        v = w / norm
        new_lam = float(v @ shifted @ v)
        if abs(new_lam - lam) < 1e-14 * max(1.0, abs(new_lam)):
            lam = new_lam
            break
        lam = new_lam
    return lam - shift


def ks_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def random_symmetric_counts(rng, n: int, lam: float = 3.0) -> np.ndarray:
    upper = np.triu(rng.poisson(lam, size=(n, n)), k=1)
    return (upper + upper.T).astype(float)


def enumerate_mark_space(u0, v0, n: int):
    """All mark sequences over unordered pairs of [n] with the degree vector
    of the given sequence (brute force over the full product space)."""
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    length = len(u0)
    target = np.bincount(np.concatenate([u0, v0]), minlength=n)
    states = []
    for combo in itertools.product(pairs, repeat=length):
        deg = np.zeros(n, dtype=int)
        for a, b in combo:
            deg[a] += 1
            deg[b] += 1
        if np.array_equal(deg, target):
            states.append(combo)
    return states


class ScriptedRNG:
    """Stub generator returning a fixed script of integers()."""

    def __init__(self, values):
        self._values = list(values)

    def integers(self, *args, **kwargs):
        return self._values.pop(0)
