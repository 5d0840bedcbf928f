"""Randomized p-values, same-level combination, the bottom-up dynamic program,
calibration, hierarchical adjustment, and the hereditary rejection rule."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dists import beta_1n_cdf, binom_two_sided_tail, chi2_survival
from .partition import PartitionTree

__all__ = [
    "PvalGrid",
    "CombinedTable",
    "PvalNode",
    "PvalTree",
    "randomized_pvalue",
    "fisher_combine",
    "min_combine",
    "dp_all_levels",
    "min_across_resolutions",
    "bonferroni_calibrate",
    "resample_calibrate",
    "meinshausen_adjust",
    "rejection_set",
    "p_tilde_levels",
    "p_tilde_batched",
    "assemble_pval_tree",
    "assemble_from_stacks",
]

LOG_FLOOR = 1e-300
COMBINERS = ("fisher", "min")


class PvalGrid:
    """Per-bin p-values for levels 1..R, optionally with a root (level-0) value."""

    def __init__(self, by_level, root: float | None = None):
        levels = {}
        for r, vals in dict(by_level).items():
            arr = np.asarray(vals, dtype=float)
            if arr.shape != (2**r,):
                raise ValueError(f"level {r} must hold {2**r} values")
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError("p-values must lie in [0, 1]")
            levels[int(r)] = arr
        want = set(range(1, len(levels) + 1))
        if set(levels) != want:
            raise ValueError("grid must cover levels 1..R contiguously")
        self.by_level = levels
        if root is not None:
            root = float(root)
            if not 0 <= root <= 1:
                raise ValueError("p-values must lie in [0, 1]")
        self.root = root

    @property
    def levels(self) -> int:
        return len(self.by_level)

    def level(self, r: int) -> np.ndarray:
        return self.by_level[r]


class CombinedTable:
    """Combined p-values p(s, j, r) for every node (s, j) and resolution r."""

    def __init__(self, levels: int, entries: dict[tuple[int, int], np.ndarray]):
        self.levels = levels
        self._entries = entries  # (s, r) -> array over j in [2**s]

    def entry(self, s: int, j: int, r: int) -> float:
        key = (s, r)
        if key not in self._entries or not 1 <= j <= 2**s:
            raise ValueError(f"no table entry for node ({s}, {j}) at resolution {r}")
        return float(self._entries[key][j - 1])

    def resolutions(self, s: int) -> list[int]:
        return sorted(r for (s_, r) in self._entries if s_ == s)

    def values(self, s: int, j: int) -> np.ndarray:
        return np.array([self.entry(s, j, r) for r in self.resolutions(s)])


def randomized_pvalue(a, m, u):
    """Uniformly distributed exact p-value for a balanced binomial count.

    With t = |a - m/2| and S the two-sided binomial tail, returns
    u*S(t) + (1-u)*S(t+1); never exceeds the unrandomized p-value S(t).
    """
    a_arr = np.asarray(a)
    m_arr = np.asarray(m)
    u_arr = np.asarray(u, dtype=float)
    if np.any(a_arr < 0) or np.any(a_arr > m_arr):
        raise ValueError("need 0 <= a <= m")
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValueError("u must lie in [0, 1]")
    t = np.abs(a_arr - m_arr / 2.0)
    out = u_arr * binom_two_sided_tail(m_arr, t) \
        + (1.0 - u_arr) * binom_two_sided_tail(m_arr, t + 1.0)
    if np.isscalar(a) and np.isscalar(m) and np.isscalar(u):
        return float(out)
    return out


def fisher_combine(pvals) -> float:
    """Chi-square tail of -2*sum(log p) with 2k degrees of freedom."""
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        raise ValueError("cannot combine an empty list of p-values")
    stat = -2.0 * np.log(np.maximum(p, LOG_FLOOR)).sum()
    return float(chi2_survival(2 * p.size, stat))


def min_combine(pvals) -> float:
    """Beta(1, k) left tail of the smallest of k p-values."""
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        raise ValueError("cannot combine an empty list of p-values")
    return float(beta_1n_cdf(p.size, p.min()))


def _fisher_map(agg: np.ndarray, k: int) -> np.ndarray:
    return chi2_survival(2 * k, agg)


def _min_map(agg: np.ndarray, k: int) -> np.ndarray:
    return beta_1n_cdf(k, agg)


def _dp_iter(grid: PvalGrid, combiner: str):
    """Yield (s, r, combined array over j) bottom-up for every node/resolution."""
    if combiner not in COMBINERS:
        raise ValueError(f"combiner must be one of {COMBINERS}")
    fisher = combiner == "fisher"
    for r in range(1, grid.levels + 1):
        vals = grid.level(r)
        agg = -2.0 * np.log(np.maximum(vals, LOG_FLOOR)) if fisher else vals.copy()
        for depth in range(r + 1):
            s = r - depth
            k = 2**depth
            yield s, r, (_fisher_map(agg, k) if fisher else _min_map(agg, k))
            if s == 0:
                break
            pair = agg.reshape(-1, 2)
            agg = pair.sum(axis=1) if fisher else pair.min(axis=1)


def dp_all_levels(grid: PvalGrid, combiner: str = "fisher",
                  include_root: bool = False) -> CombinedTable:
    """Combine the whole grid bottom-up.

    Returns every p(s, j, r) for r in {max(s,1)..R}; equals the direct
    combination of the level-r values under node (s, j). The optional root
    entry adds resolution r=0 for the global node.
    """
    entries: dict[tuple[int, int], np.ndarray] = {}
    for s, r, arr in _dp_iter(grid, combiner):
        entries[(s, r)] = arr
    if include_root:
        if grid.root is None:
            raise ValueError("grid has no root value to include")
        combine = fisher_combine if combiner == "fisher" else min_combine
        entries[(0, 0)] = np.array([combine([grid.root])])
    return CombinedTable(grid.levels, entries)


def min_across_resolutions(table: CombinedTable, s: int, j: int) -> float:
    """Smallest combined p-value for node (s, j) over its resolution levels."""
    vals = table.values(s, j)
    if vals.size == 0:
        raise ValueError(f"node ({s}, {j}) absent from the table")
    return float(vals.min())


def p_tilde_levels(grid: PvalGrid, combiner: str = "fisher",
                   include_root: bool = False) -> list[np.ndarray]:
    """Min-across-resolutions for every node, as one array per level s."""
    out = [np.full(2**s, np.inf) for s in range(grid.levels + 1)]
    for s, _r, arr in _dp_iter(grid, combiner):
        np.minimum(out[s], arr, out=out[s])
    if include_root:
        if grid.root is None:
            raise ValueError("grid has no root value to include")
        out[0][0] = min(out[0][0], grid.root)
    return out


def p_tilde_batched(values_by_level: dict[int, np.ndarray], combiner: str,
                    root: np.ndarray | None = None) -> list[np.ndarray]:
    """Row-wise `p_tilde_levels` over a stack of grids.

    `values_by_level[r]` holds one (n_grids, 2**r) matrix per level; returns
    one (n_grids, 2**s) matrix per node level. Row b equals p_tilde_levels
    applied to grid b alone.
    """
    if combiner not in COMBINERS:
        raise ValueError(f"combiner must be one of {COMBINERS}")
    fisher = combiner == "fisher"
    levels = max(values_by_level)
    n_grids = values_by_level[1].shape[0]
    out = [np.full((n_grids, 2**s), np.inf) for s in range(levels + 1)]
    for r in range(1, levels + 1):
        vals = values_by_level[r]
        agg = -2.0 * np.log(np.maximum(vals, LOG_FLOOR)) if fisher else vals.copy()
        for depth in range(r + 1):
            s = r - depth
            k = 2**depth
            mapped = _fisher_map(agg, k) if fisher else _min_map(agg, k)
            np.minimum(out[s], mapped, out=out[s])
            if s == 0:
                break
            folded = agg.reshape(n_grids, -1, 2)
            agg = folded.sum(axis=2) if fisher else folded.min(axis=2)
    if root is not None:
        np.minimum(out[0][:, 0], np.asarray(root, dtype=float), out=out[0][:, 0])
    return out


def bonferroni_calibrate(p_tilde: float, s: int, levels: int) -> float:
    """Bonferroni correction for taking the minimum over R - s + 1 resolutions."""
    return min(1.0, (levels - s + 1) * p_tilde)


def resample_calibrate(observed: float, replicates) -> float:
    """Fraction of null replicates at or below the observed value."""
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise ValueError("need at least one replicate")
    return float(np.mean(reps <= observed))


def meinshausen_adjust(p_check_levels, levels: int,
                       reverse_logic: bool) -> list[np.ndarray]:
    """Inflate per-node p-values by the terminal-leaf count ratio.

    With `reverse_logic` (a false parent forces a false child somewhere) the
    factor is 2**min(s, R-1); without it, 2**s. The root is never inflated.
    """
    out = []
    for s, arr in enumerate(p_check_levels):
        arr = np.asarray(arr, dtype=float)
        factor = 2 ** min(s, levels - 1) if reverse_logic else 2**s
        out.append(np.minimum(1.0, factor * arr))
    return out


def rejection_set(p_adj_levels, alpha: float) -> list[np.ndarray]:
    """Hereditary rejections: a node rejects iff it and all its ancestors pass."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    flags: list[np.ndarray] = []
    for s, arr in enumerate(p_adj_levels):
        arr = np.asarray(arr, dtype=float)
        own = arr <= alpha
        if s == 0:
            flags.append(own)
        else:
            flags.append(own & np.repeat(flags[s - 1], 2))
    return flags


@dataclass
class PvalNode:
    s: int
    j: int
    lo: float
    hi: float
    p_tilde: float
    p_check: float
    p_adj: float
    reject: bool


class PvalTree:
    """Final simultaneously valid p-values over the partition nodes."""

    def __init__(self, alpha: float, nodes: list[PvalNode]):
        self.alpha = float(alpha)
        self.nodes = sorted(nodes, key=lambda n: (n.s, n.j))
        self._index = {(n.s, n.j): n for n in self.nodes}
        self.levels = max(n.s for n in self.nodes) if self.nodes else 0

    def node(self, s: int, j: int) -> PvalNode:
        return self._index[(s, j)]

    def rejected(self) -> list[tuple[int, int]]:
        return [(n.s, n.j) for n in self.nodes if n.reject]

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "nodes": [
                {"s": n.s, "j": n.j, "lo": n.lo, "hi": n.hi,
                 "p_tilde": n.p_tilde, "p_check": n.p_check,
                 "p_adj": n.p_adj, "reject": bool(n.reject)}
                for n in self.nodes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "PvalTree":
        obj = json.loads(text)
        nodes = [PvalNode(int(d["s"]), int(d["j"]), float(d["lo"]), float(d["hi"]),
                          float(d["p_tilde"]), float(d["p_check"]),
                          float(d["p_adj"]), bool(d["reject"]))
                 for d in obj["nodes"]]
        return cls(float(obj["alpha"]), nodes)

    def render_text(self) -> str:
        lines = []

        def walk(s, j):
            n = self.node(s, j)
            mark = "*" if n.reject else ""
            lines.append(f"{'  ' * s}({s},{j}) [{n.lo:g},{n.hi:g}) p={n.p_adj:.3f}{mark}")
            if s < self.levels:
                walk(s + 1, 2 * j - 1)
                walk(s + 1, 2 * j)

        walk(0, 1)
        return "\n".join(lines)


def assemble_from_stacks(tree: PartitionTree, tilde_stacks,
                         alpha: float, reverse_logic: bool) -> PvalTree:
    """`assemble_pval_tree` where row 0 of each per-level matrix is the
    observed run and the remaining rows are the replicates."""
    p_tilde = [stack[0] for stack in tilde_stacks]
    reps = [[stack[b] for stack in tilde_stacks]
            for b in range(1, tilde_stacks[0].shape[0])]
    return assemble_pval_tree(tree, p_tilde, reps, alpha, reverse_logic)


def assemble_pval_tree(tree: PartitionTree, p_tilde, p_tilde_reps,
                       alpha: float, reverse_logic: bool) -> PvalTree:
    """Calibrate observed minima against replicates, adjust, and flag rejections.

    `p_tilde` is one array per level s; `p_tilde_reps` is a list of such
    structures, one per resampling replicate.
    """
    levels = tree.levels
    if len(p_tilde) != levels + 1:
        raise ValueError("p_tilde must cover levels 0..R")
    if not p_tilde_reps:
        raise ValueError("need at least one replicate")
    p_check = []
    for s in range(levels + 1):
        obs = np.asarray(p_tilde[s], dtype=float)
        reps = np.stack([np.asarray(rep[s], dtype=float) for rep in p_tilde_reps])
        p_check.append((reps <= obs[None, :]).mean(axis=0))
    p_adj = meinshausen_adjust(p_check, levels, reverse_logic)
    flags = rejection_set(p_adj, alpha)
    nodes = []
    for s in range(levels + 1):
        for j in range(1, 2**s + 1):
            lo, hi = tree.region(s, j)
            nodes.append(PvalNode(
                s, j, lo, hi,
                float(p_tilde[s][j - 1]), float(p_check[s][j - 1]),
                float(p_adj[s][j - 1]), bool(flags[s][j - 1]),
            ))
    return PvalTree(alpha, nodes)
