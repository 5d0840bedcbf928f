"""End-to-end network pipelines: symmetric eigenvalue test (with optional
bootstrap correction), degree-corrected signed-polygon test, and the
bipartite eigenvalue test."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .combine import PvalTree, assemble_from_stacks, p_tilde_batched
from .dists import MU_TW1, SIGMA_TW1
from .netstats import (
    DegenerateBinError,
    LongitudinalNetwork,
    asym_tw_stat,
    eta_hat,
    max_eigenvalue,
    sgn_pvalue,
    sgnq,
    sgnt,
    tw_pvalue_from_stat,
)
from .partition import PartitionTree, build_equal_width
from .resample import EdgeMarkSequence, mh_run_batched

__all__ = [
    "NetworkTestConfig",
    "run_symmetric",
    "run_degree_corrected",
    "run_asymmetric",
    "suggest_network_levels",
]

log = logging.getLogger(__name__)

SYMMETRIC_STATS = ("eig", "eig-bootstrap")
DC_STATS = ("sgnt", "sgnq")


@dataclass
class NetworkTestConfig:
    """Knobs shared by the network pipelines."""

    statistic: str = "eig"
    levels: int = 3
    boot: int = 200
    combiner: str = "fisher"
    alpha: float = 0.05
    include_root: bool = False
    mcmc_burnin_factor: float = 10.0
    mcmc_thin_factor: float = 5.0
    mcmc_independent_chains: bool = False
    reverse_logic: bool | None = None
    threads: int = 1

    def __post_init__(self):
        if self.boot < 1:
            raise ValueError("boot must be >= 1")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    def resolved_reverse_logic(self) -> bool:
        if self.reverse_logic is not None:
            return self.reverse_logic
        return self.statistic not in DC_STATS


def _pair_codes(n: int):
    iu, iv = np.triu_indices(n, k=1)
    code = np.full((n, n), -1, dtype=np.int64)
    code[iu, iv] = np.arange(iu.size)
    code[iv, iu] = np.arange(iu.size)
    return iu, iv, code


def _leaf_pair_counts(leaf_idx, pair_idx, n_leaf, n_pairs) -> np.ndarray:
    flat = np.bincount(leaf_idx * n_pairs + pair_idx, minlength=n_leaf * n_pairs)
    return flat.reshape(n_leaf, n_pairs)


def _level_stacks(leaf_counts: np.ndarray, levels: int) -> dict[int, np.ndarray]:
    out = {levels: leaf_counts}
    for r in range(levels - 1, 0, -1):
        c = out[r + 1]
        out[r] = c.reshape(c.shape[0] // 2, 2, -1).sum(axis=1)
    return out


def _warn_degenerate(stacks, levels):
    empty = [(r, l + 1) for r in range(1, levels + 1)
             for l in range(2**r) if stacks[r][l].sum() == 0]
    if empty:
        log.warning("%d empty bins yield p=1 (deepest first: %s)",
                    len(empty), empty[-min(len(empty), 5):])
    return empty


def _pval_arrays(stacks, levels, pfun, include_root):
    """Per-level p-value arrays (and optional root value) for one grid."""
    vals = {r: np.array([pfun(stacks[r][l]) for l in range(2**r)])
            for r in range(1, levels + 1)}
    root = pfun(stacks[1].sum(axis=0)) if include_root else None
    return vals, root


def _stack_grids(grids, levels, include_root):
    """Stack per-replicate (vals, root) pairs into p_tilde_batched input."""
    by_level = {r: np.stack([g[0][r] for g in grids])
                for r in range(1, levels + 1)}
    root = np.array([g[1] for g in grids]) if include_root else None
    return by_level, root


def _sym_lambda(counts_vec: np.ndarray, n: int, iu, iv) -> float:
    """Largest eigenvalue of the centered/scaled matrix for one bin."""
    total = counts_vec.sum()
    if total == 0:
        raise DegenerateBinError("empty bin")
    gamma = total / counts_vec.size
    vals = (counts_vec - gamma) / math.sqrt((n - 1) * gamma)
    m = np.zeros((n, n))
    m[iu, iv] = vals
    m[iv, iu] = vals
    return max_eigenvalue(m)


def _uniform_multinomial(rng, total, n_cells, pvals):
    if total == 0:
        return np.zeros(n_cells, dtype=np.int64)
    return rng.multinomial(int(total), pvals)


def run_symmetric(net: LongitudinalNetwork, tree: PartitionTree,
                  cfg: NetworkTestConfig, rng=None) -> PvalTree:
    """Multiscale community test against a homogeneous symmetric null.

    Per-bin two-sided Tracy-Widom p-values from the centered/scaled largest
    eigenvalue (bootstrap location/scale correction when the statistic is
    "eig-bootstrap", reusing the calibration replicates), combined over the
    tree and calibrated by uniform pair-mark resampling.
    """
    if net.bipartite:
        raise ValueError("symmetric pipeline needs a symmetric network")
    if cfg.statistic not in SYMMETRIC_STATS:
        raise ValueError(f"statistic must be one of {SYMMETRIC_STATS}")
    rng = np.random.default_rng(rng)
    n = net.n_nodes
    levels = tree.levels
    n_leaf = 2**levels
    iu, iv, code = _pair_codes(n)
    n_pairs = iu.size
    pvals_uniform = np.full(n_pairs, 1.0 / n_pairs)

    leaf_idx = (np.asarray(tree.locate(net.times, levels)) - 1
                if len(net) else np.empty(0, dtype=np.int64))
    pair_idx = code[net.u, net.v]
    obs_stacks = _level_stacks(_leaf_pair_counts(leaf_idx, pair_idx, n_leaf, n_pairs),
                               levels)
    _warn_degenerate(obs_stacks, levels)
    leaf_totals = obs_stacks[levels].sum(axis=1)

    def lam_or_nan(vec):
        try:
            return _sym_lambda(vec, n, iu, iv)
        except DegenerateBinError:
            return np.nan

    def raw_pval(vec):
        val = lam_or_nan(vec)
        if np.isnan(val):
            return 1.0
        return tw_pvalue_from_stat(n ** (2.0 / 3.0) * (val - 2.0))

    streams = rng.spawn(cfg.boot)

    def replicate_stacks(b: int):
        stream = streams[b]
        rep_leaf = np.stack([
            _uniform_multinomial(stream, tot, n_pairs, pvals_uniform)
            for tot in leaf_totals
        ])
        return _level_stacks(rep_leaf, levels)

    if cfg.statistic == "eig":
        def one_grid(b: int):
            stacks = obs_stacks if b == 0 else replicate_stacks(b - 1)
            return _pval_arrays(stacks, levels, raw_pval, cfg.include_root)

        grids = _map_replicates(one_grid, cfg.boot + 1, cfg.threads)
        by_level, root = _stack_grids(grids, levels, cfg.include_root)
        tilde = p_tilde_batched(by_level, cfg.combiner, root)
        return assemble_from_stacks(tree, tilde, cfg.alpha,
                                    cfg.resolved_reverse_logic())

    # eig-bootstrap: collect eigenvalue grids first, then correct location/scale
    def lam_grid(stacks):
        out = {r: np.array([lam_or_nan(stacks[r][l]) for l in range(2**r)])
               for r in range(1, levels + 1)}
        if cfg.include_root:
            out[0] = np.array([lam_or_nan(stacks[1].sum(axis=0))])
        return out

    lam_all = _map_replicates(
        lambda b: lam_grid(obs_stacks if b == 0 else replicate_stacks(b - 1)),
        cfg.boot + 1, cfg.threads)

    mu_hat, sd_hat = {}, {}
    for r in lam_all[0]:
        stacked = np.stack([rep[r] for rep in lam_all[1:]])
        with np.errstate(invalid="ignore"):
            mu_hat[r] = np.nanmean(stacked, axis=0)
            sd_hat[r] = np.nanstd(stacked, axis=0, ddof=1)

    def corrected_pvals(lams):
        out = {}
        for r, arr in lams.items():
            with np.errstate(invalid="ignore", divide="ignore"):
                z = MU_TW1 + SIGMA_TW1 * (arr - mu_hat[r]) / sd_hat[r]
            out[r] = np.array([tw_pvalue_from_stat(zi) if np.isfinite(zi) else 1.0
                               for zi in z])
        return out

    corrected = [corrected_pvals(lams) for lams in lam_all]
    grids = [({r: c[r] for r in range(1, levels + 1)},
              float(c[0][0]) if cfg.include_root else None) for c in corrected]
    by_level, root = _stack_grids(grids, levels, cfg.include_root)
    tilde = p_tilde_batched(by_level, cfg.combiner, root)
    return assemble_from_stacks(tree, tilde, cfg.alpha,
                                cfg.resolved_reverse_logic())


def run_degree_corrected(net: LongitudinalNetwork, tree: PartitionTree,
                         cfg: NetworkTestConfig, rng=None) -> PvalTree:
    """Multiscale community test under per-node rate heterogeneity.

    Per-bin signed triangle/quadrilateral statistics with two-sided normal
    p-values, calibrated by a rewiring chain that holds every node's total
    interaction count fixed (so the unknown rate vector drops out).
    """
    if net.bipartite:
        raise ValueError("degree-corrected pipeline needs a symmetric network")
    if cfg.statistic not in DC_STATS:
        raise ValueError(f"statistic must be one of {DC_STATS}")
    rng = np.random.default_rng(rng)
    n = net.n_nodes
    levels = tree.levels
    n_leaf = 2**levels
    iu, iv, code = _pair_codes(n)
    n_pairs = iu.size

    leaf_idx = (np.asarray(tree.locate(net.times, levels)) - 1
                if len(net) else np.empty(0, dtype=np.int64))

    stat_fn = sgnt if cfg.statistic == "sgnt" else sgnq
    kind = "T" if cfg.statistic == "sgnt" else "Q"

    def bin_pval(vec):
        if vec.sum() == 0:
            return 1.0
        a = np.zeros((n, n))
        a[iu, iv] = vec
        a[iv, iu] = vec
        try:
            eta, _ = eta_hat(a)
            return sgn_pvalue(stat_fn(a), kind, float((eta**2).sum()))
        except DegenerateBinError:
            return 1.0

    def grid_for(pair_idx):
        stacks = _level_stacks(_leaf_pair_counts(leaf_idx, pair_idx,
                                                 n_leaf, n_pairs), levels)
        return _pval_arrays(stacks, levels, bin_pval, cfg.include_root), stacks

    obs_pair_idx = code[net.u, net.v]
    obs_grid, obs_stacks = grid_for(obs_pair_idx)
    _warn_degenerate(obs_stacks, levels)

    n_events = len(net)
    per_superstep = max(1, n_events // 2)
    burn = math.ceil(cfg.mcmc_burnin_factor * n_events / per_superstep)
    thin = max(1, math.ceil(cfg.mcmc_thin_factor * n_events / per_superstep))
    start = EdgeMarkSequence(net.u, net.v) if n_events >= 2 else None

    def replicate_marks():
        # one long chain by default; independent chains re-burn from the data
        if start is None:
            while True:
                yield obs_pair_idx
        elif cfg.mcmc_independent_chains:
            for stream in rng.spawn(cfg.boot):
                fresh = mh_run_batched(start, burn, stream)
                yield code[fresh.u, fresh.v]
        else:
            chain_rng = rng.spawn(1)[0]
            chain = mh_run_batched(start, burn, chain_rng)
            while True:
                chain = mh_run_batched(chain, thin, chain_rng)
                yield code[chain.u, chain.v]

    grids = [obs_grid]
    for rep_pair_idx, _ in zip(replicate_marks(), range(cfg.boot)):
        grids.append(grid_for(rep_pair_idx)[0])

    by_level, root = _stack_grids(grids, levels, cfg.include_root)
    tilde = p_tilde_batched(by_level, cfg.combiner, root)
    return assemble_from_stacks(tree, tilde, cfg.alpha,
                                cfg.resolved_reverse_logic())


def run_asymmetric(net: LongitudinalNetwork, tree: PartitionTree,
                   cfg: NetworkTestConfig, rng=None) -> PvalTree:
    """Multiscale community test for bipartite interaction arrays."""
    if not net.bipartite:
        raise ValueError("asymmetric pipeline needs a bipartite network")
    if cfg.statistic != "asym-eig":
        raise ValueError("statistic must be 'asym-eig'")
    rng = np.random.default_rng(rng)
    m, n = net.shape
    levels = tree.levels
    n_leaf = 2**levels
    n_cells = m * n
    pvals_uniform = np.full(n_cells, 1.0 / n_cells)

    leaf_idx = (np.asarray(tree.locate(net.times, levels)) - 1
                if len(net) else np.empty(0, dtype=np.int64))
    cell_idx = net.u * n + net.v
    obs_stacks = _level_stacks(_leaf_pair_counts(leaf_idx, cell_idx,
                                                 n_leaf, n_cells), levels)
    _warn_degenerate(obs_stacks, levels)
    leaf_totals = obs_stacks[levels].sum(axis=1)

    def bin_pval(vec):
        try:
            return tw_pvalue_from_stat(asym_tw_stat(vec.reshape(m, n)))
        except DegenerateBinError:
            return 1.0

    streams = rng.spawn(cfg.boot)

    def one_grid(b: int):
        if b == 0:
            stacks = obs_stacks
        else:
            stream = streams[b - 1]
            rep_leaf = np.stack([
                _uniform_multinomial(stream, tot, n_cells, pvals_uniform)
                for tot in leaf_totals
            ])
            stacks = _level_stacks(rep_leaf, levels)
        return _pval_arrays(stacks, levels, bin_pval, cfg.include_root)

    grids = _map_replicates(one_grid, cfg.boot + 1, cfg.threads)
    by_level, root = _stack_grids(grids, levels, cfg.include_root)
    tilde = p_tilde_batched(by_level, cfg.combiner, root)
    return assemble_from_stacks(tree, tilde, cfg.alpha,
                                cfg.resolved_reverse_logic())


def _map_replicates(fn, boot: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(boot)))
    return [fn(b) for b in range(boot)]


def _connected(n: int, us: np.ndarray, vs: np.ndarray) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(us, vs):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    roots = {find(x) for x in range(n)}
    return len(roots) == 1


def suggest_network_levels(net: LongitudinalNetwork, requested: int = 6) -> int:
    """Deepest R <= requested whose leaf-bin graphs are all connected;
    falls back to the deepest R with no empty leaf bin, then to 1."""
    fallback = None
    for r in range(requested, 0, -1):
        tree = build_equal_width(net.domain, r)
        leaf = np.asarray(tree.locate(net.times, r)) - 1 if len(net) else None
        if leaf is None:
            break
        counts = np.bincount(leaf, minlength=2**r)
        if counts.min() == 0:
            continue
        if fallback is None:
            fallback = r
        if net.bipartite:
            m, _ = net.shape
            ok = all(_connected(net.n_nodes, net.u[leaf == l] ,
                                net.v[leaf == l] + m) for l in range(2**r))
        else:
            ok = all(_connected(net.n_nodes, net.u[leaf == l], net.v[leaf == l])
                     for l in range(2**r))
        if ok:
            return r
    return fallback if fallback is not None else 1
