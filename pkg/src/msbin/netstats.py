"""Per-bin network test statistics: adjacency binning, centered/scaled largest
eigenvalue with Tracy-Widom p-values (plus bootstrap location/scale correction),
signed triangle/quadrilateral statistics, and the bipartite eigenvalue test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import MU_TW1, SIGMA_TW1, normal_cdf, tw1_cdf
from .partition import Domain, PartitionTree

__all__ = [
    "DegenerateBinError",
    "LongitudinalNetwork",
    "bin_adjacency",
    "bin_bipartite",
    "bin_all_levels",
    "center_scale",
    "max_eigenvalue",
    "tw_eig_stat",
    "tw_eig_pvalue",
    "tw_pvalue_from_stat",
    "bootstrap_corrected_stat",
    "bootstrap_tw_pvalue",
    "eta_hat",
    "sgnt",
    "sgnq",
    "sgn_pvalue",
    "asym_tw_stat",
    "asym_tw_pvalue",
]

ITERATIVE_EIG_MIN = 150


class DegenerateBinError(ValueError):
    """A bin's counts carry no usable signal (all-zero or too sparse)."""


@dataclass(frozen=True)
class LongitudinalNetwork:
    """Timestamped interactions among nodes.

    Node indices are 0-based internally. Symmetric networks store each pair
    with u < v; bipartite networks index the two sides separately, with
    `shape = (m, n)` giving the side sizes.
    """

    u: np.ndarray
    v: np.ndarray
    times: np.ndarray
    n_nodes: int
    domain: Domain
    shape: tuple[int, int] | None = None  # set for bipartite networks

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        t = np.asarray(self.times, dtype=float)
        if not u.shape == v.shape == t.shape or u.ndim != 1:
            raise ValueError("u, v, times must be aligned 1-d arrays")
        if t.size and not np.all(self.domain.contains(t)):
            raise ValueError("event time outside the domain")
        order = np.argsort(t, kind="stable")
        u, v, t = u[order], v[order], t[order]
        if self.shape is None:
            if np.any(u == v):
                raise ValueError("self-interactions are not allowed")
            if u.size and (u.min() < 0 or max(u.max(), v.max()) >= self.n_nodes):
                raise ValueError("node index out of range")
            u, v = np.minimum(u, v), np.maximum(u, v)
        else:
            m, n = self.shape
            if self.n_nodes != m + n:
                raise ValueError("n_nodes must equal m + n for bipartite networks")
            if u.size and (u.min() < 0 or u.max() >= m or v.min() < 0 or v.max() >= n):
                raise ValueError("node index out of range")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "times", t)

    @property
    def bipartite(self) -> bool:
        return self.shape is not None

    def __len__(self) -> int:
        return int(self.times.size)

    @classmethod
    def from_records(cls, records, n_nodes: int | None = None,
                     domain: Domain | None = None,
                     shape: tuple[int, int] | None = None,
                     one_based: bool = True) -> "LongitudinalNetwork":
        """Build from (u, v, t) triples, 1-based node ids by default."""
        recs = list(records)
        if recs:
            u = np.array([r[0] for r in recs], dtype=np.int64)
            v = np.array([r[1] for r in recs], dtype=np.int64)
            t = np.array([r[2] for r in recs], dtype=float)
        else:
            u = v = np.empty(0, dtype=np.int64)
            t = np.empty(0, dtype=float)
        if one_based:
            u = u - 1
            v = v - 1
        if shape is None and n_nodes is None:
            n_nodes = int(max(u.max(initial=-1), v.max(initial=-1)) + 1)
        if shape is not None:
            n_nodes = shape[0] + shape[1]
        if domain is None:
            if t.size == 0:
                raise ValueError("cannot infer a domain from an empty record set")
            domain = Domain(float(t.min()), float(np.nextafter(t.max(), np.inf)))
        return cls(u, v, t, int(n_nodes), domain, shape)


def _bin_slice(net: LongitudinalNetwork, tree: PartitionTree, r: int, l: int):
    lo, hi = tree.region(r, l)
    left = np.searchsorted(net.times, lo, side="left")
    right = np.searchsorted(net.times, hi, side="left")
    return slice(left, right)


def bin_adjacency(net: LongitudinalNetwork, tree: PartitionTree,
                  r: int, l: int) -> np.ndarray:
    """Symmetric count matrix of interactions falling in bin (r, l)."""
    if net.bipartite:
        raise ValueError("bipartite network: use bin_bipartite")
    sl = _bin_slice(net, tree, r, l)
    n = net.n_nodes
    a = np.zeros((n, n), dtype=np.int64)
    np.add.at(a, (net.u[sl], net.v[sl]), 1)
    a += a.T
    return a


def bin_bipartite(net: LongitudinalNetwork, tree: PartitionTree,
                  r: int, l: int) -> np.ndarray:
    """Rectangular count matrix of cross-group interactions in bin (r, l)."""
    if not net.bipartite:
        raise ValueError("symmetric network: use bin_adjacency")
    sl = _bin_slice(net, tree, r, l)
    m, n = net.shape
    b = np.zeros((m, n), dtype=np.int64)
    np.add.at(b, (net.u[sl], net.v[sl]), 1)
    return b


def bin_all_levels(net: LongitudinalNetwork,
                   tree: PartitionTree) -> dict[tuple[int, int], np.ndarray]:
    """Count matrices for every bin (r, l), r = 1..R; the binned network.

    Entries at level r-1 equal the sum of their two children at level r.
    """
    binner = bin_bipartite if net.bipartite else bin_adjacency
    return {(r, l): binner(net, tree, r, l)
            for r in range(1, tree.levels + 1) for l in range(1, 2**r + 1)}


def center_scale(a: np.ndarray) -> np.ndarray:
    """Empirically center and scale a symmetric count matrix.

    Subtracts the off-diagonal mean gamma-hat and divides by
    sqrt((n-1) * gamma_hat); the diagonal stays zero.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or n < 2:
        raise ValueError("need a square matrix with n >= 2")
    gamma = a.sum() / (n * n - n)
    if gamma <= 0:
        raise DegenerateBinError("all off-diagonal counts are zero")
    out = (a - gamma) / np.sqrt((n - 1) * gamma)
    np.fill_diagonal(out, 0.0)
    return out


def max_eigenvalue(m: np.ndarray) -> float:
    """Largest (algebraic) eigenvalue of a symmetric real matrix.

    Small matrices use the dense symmetric solver; larger ones a Lanczos
    solve with a fixed start vector (deterministic) at relative tolerance
    1e-9, falling back to the dense path if it fails to converge.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    n = m.shape[0]
    if n < ITERATIVE_EIG_MIN:
        return float(np.linalg.eigvalsh(m)[-1])
    from scipy.sparse.linalg import eigsh

    try:
        vals = eigsh(m, k=1, which="LA", tol=1e-9, v0=_lanczos_start(n),
                     return_eigenvectors=False, maxiter=100 * n)
        return float(vals[0])
    except Exception:
        return float(np.linalg.eigvalsh(m)[-1])


_LANCZOS_CACHE: dict[int, np.ndarray] = {}


def _lanczos_start(n: int) -> np.ndarray:
    if n not in _LANCZOS_CACHE:
        _LANCZOS_CACHE[n] = np.random.default_rng(0x5EED).standard_normal(n)
    return _LANCZOS_CACHE[n]


def tw_pvalue_from_stat(stat: float) -> float:
    """Two-sided Tracy-Widom p-value of an already-normalized statistic."""
    f = tw1_cdf(stat)
    return float(min(1.0, 2.0 * min(f, 1.0 - f)))


def tw_eig_stat(a: np.ndarray) -> float:
    """n^(2/3) * (lambda_1(centered/scaled A) - 2)."""
    scaled = center_scale(a)
    n = scaled.shape[0]
    return float(n ** (2.0 / 3.0) * (max_eigenvalue(scaled) - 2.0))


def tw_eig_pvalue(a: np.ndarray) -> float:
    """Two-sided Tracy-Widom p-value of the largest-eigenvalue statistic.

    Degenerate (all-zero) bins return 1.0.
    """
    try:
        return tw_pvalue_from_stat(tw_eig_stat(a))
    except DegenerateBinError:
        return 1.0


def bootstrap_corrected_stat(lam_obs: float, lam_replicates) -> float | None:
    """Map an observed eigenvalue onto the Tracy-Widom location/scale using
    the replicate mean and standard deviation; None when the spread is zero."""
    lams = np.asarray(lam_replicates, dtype=float)
    if lams.size < 2:
        raise ValueError("need at least two replicates")
    mu_hat = lams.mean()
    sd_hat = lams.std(ddof=1)
    if sd_hat == 0:
        return None
    return float(MU_TW1 + SIGMA_TW1 * (lam_obs - mu_hat) / sd_hat)


def bootstrap_tw_pvalue(a: np.ndarray, replicates) -> float:
    """Bootstrap-corrected two-sided Tracy-Widom p-value.

    `replicates` are count matrices resampled under the null with the same
    binning; their eigenvalues estimate the null location and scale.
    """
    if len(replicates) < 2:
        raise ValueError("need at least two replicates")
    try:
        lam_obs = max_eigenvalue(center_scale(a))
    except DegenerateBinError:
        return 1.0
    lams = []
    for rep in replicates:
        try:
            lams.append(max_eigenvalue(center_scale(rep)))
        except DegenerateBinError:
            continue
    if len(lams) < 2:
        return 1.0
    corrected = bootstrap_corrected_stat(lam_obs, lams)
    if corrected is None:
        return 1.0
    return tw_pvalue_from_stat(corrected)


def eta_hat(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Degree profile A*1 / sqrt(V) with V = 1'A1; raises on an empty bin."""
    a = np.asarray(a, dtype=float)
    V = float(a.sum())
    if V <= 0:
        raise DegenerateBinError("total interaction count is zero")
    return a.sum(axis=1) / np.sqrt(V), V


def _signed_residual(a: np.ndarray) -> np.ndarray:
    eta, _ = eta_hat(a)
    w = np.asarray(a, dtype=float) - np.outer(eta, eta)
    np.fill_diagonal(w, 0.0)
    return w


def sgnt(a: np.ndarray) -> float:
    """Signed-triangle statistic: sum over ordered distinct index triples of
    the product of centered adjacency entries around the 3-cycle."""
    w = _signed_residual(a)
    w2 = w @ w
    return float((w2 * w).sum())


def sgnq(a: np.ndarray) -> float:
    """Signed-quadrilateral statistic over ordered distinct index 4-tuples.

    Computed from matrix powers with coincident-index corrections; equals the
    naive distinct-index sum exactly.
    """
    w = _signed_residual(a)
    w2 = w @ w
    tr4 = float((w2 * w2).sum())
    diag2 = np.einsum("ii->i", w2)
    return tr4 - 2.0 * float((diag2**2).sum()) + float((w**4).sum())


def sgn_pvalue(stat: float, kind: str, eta_norm_sq: float) -> float:
    """Two-sided normal p-value of a standardized signed-polygon statistic."""
    h = eta_norm_sq - 1.0
    if h <= 0:
        raise DegenerateBinError("eta norm too small to standardize")
    kind = kind.upper()
    if kind == "T":
        z = stat / (np.sqrt(6.0) * h**1.5)
    elif kind == "Q":
        z = (stat - 2.0 * h**2) / (np.sqrt(8.0) * h**2)
    else:
        raise ValueError("kind must be 'T' or 'Q'")
    return float(min(1.0, 2.0 * (1.0 - normal_cdf(abs(z)))))


def asym_tw_stat(b: np.ndarray) -> float:
    """Normalized largest eigenvalue of the centered cross-count Gram matrix."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or min(b.shape) < 2:
        raise ValueError("need an m x n matrix with m, n >= 2")
    m, n = b.shape
    gamma = b.sum() / (m * n)
    if gamma <= 0:
        raise DegenerateBinError("all counts are zero")
    scaled = (b - gamma) / np.sqrt(m * gamma)
    w = scaled.T @ scaled
    lam = max_eigenvalue(w)
    loc = (np.sqrt(n) + np.sqrt(m)) ** 2
    sc = (np.sqrt(n) + np.sqrt(m)) * (1.0 / np.sqrt(n) + 1.0 / np.sqrt(m)) ** (1.0 / 3.0)
    return float((m * lam - loc) / sc)


def asym_tw_pvalue(b: np.ndarray) -> float:
    """Two-sided Tracy-Widom p-value for the bipartite eigenvalue statistic."""
    try:
        return tw_pvalue_from_stat(asym_tw_stat(b))
    except DegenerateBinError:
        return 1.0
