"""Simulation generators, baseline two-sample tests (Gaussian kernel and
conditional KS), and experiment runners producing rejection-rate tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dists import MU_TW1, SIGMA_TW1
from .longitudinal import (
    NetworkTestConfig,
    run_degree_corrected,
    run_symmetric,
)
from .netstats import (
    LongitudinalNetwork,
    center_scale,
    eta_hat,
    max_eigenvalue,
    sgnq,
    sgnt,
)
from .partition import Domain, build_equal_width
from .pointproc import IntensitySpec, PointPattern, sample_poisson
from .twosample import MarkedPool, default_levels, pool, run_two_sample

__all__ = [
    "ExperimentSpec",
    "gen_two_sample_scenario",
    "gen_network_scenario",
    "sample_dcsbm_static",
    "sample_flat_poisson_matrix",
    "kernel_stat",
    "kernel_two_sample",
    "ks_two_sample",
    "run_experiment",
    "rows_to_csv",
    "rows_to_json",
]

UNIT = Domain(0.0, 1.0)

# x(1-x)^4 normalized: a Beta(2, 5) density
BETA_SHAPE = dict(a=2.0, b=5.0)


def _two_sample_intensities(scenario: str, params: dict):
    if scenario == "null-uniform":
        lam = IntensitySpec.constant(params.get("rate", 40.0))
        return lam, lam
    if scenario == "null-sine":
        rate = params.get("rate", 40.0)
        lam = IntensitySpec.sinusoid(rate, rate, 2.0 * math.pi)
        return lam, lam
    if scenario == "null-beta":
        lam = IntensitySpec.scaled_beta(params.get("rate", 40.0), **BETA_SHAPE)
        return lam, lam
    if scenario == "piecewise":
        p = float(params.get("p", 0.5))
        base = params.get("rate", 50.0)
        lam_a = IntensitySpec.constant(base)
        lam_b = IntensitySpec.piecewise(
            [0.0, 0.25, 0.5, 1.0], [base * (1 - p), base * (1 + p), base])
        return lam_a, lam_b
    if scenario == "illustrative":
        lam_a = IntensitySpec.constant(550.0)
        lam_b = IntensitySpec.sinusoid(550.0, 275.0, 4.0 * math.pi, 0.25,
                                       window=(0.25, 0.75))
        return lam_a, lam_b
    raise ValueError(f"unknown two-sample scenario {scenario!r}")


def gen_two_sample_scenario(scenario: str, rng, **params
                            ) -> tuple[PointPattern, PointPattern]:
    """Draw one pair of realizations from a named intensity design on [0, 1)."""
    lam_a, lam_b = _two_sample_intensities(scenario, params)
    rng = np.random.default_rng(rng)
    return (sample_poisson(lam_a, UNIT, rng), sample_poisson(lam_b, UNIT, rng))


def _beta_positions(rng, size):
    return rng.beta(BETA_SHAPE["a"], BETA_SHAPE["b"], size=size)


def _theta_vector(kind: str, n: int, s: float, rng) -> np.ndarray:
    if kind == "moderate":
        raw = rng.uniform(2.0, 3.0, size=n)
    elif kind == "severe":
        raw = np.sqrt(np.arange(1, n + 1, dtype=float))
    elif kind == "linear":
        raw = np.arange(1, n + 1, dtype=float)
    else:
        raise ValueError(f"unknown heterogeneity kind {kind!r}")
    return s * raw / np.linalg.norm(raw)


def _assemble_network(iu, iv, counts, pos_sampler, rng, n_nodes,
                      shape=None) -> LongitudinalNetwork:
    total = int(counts.sum())
    us = np.repeat(iu, counts)
    vs = np.repeat(iv, counts)
    ts = pos_sampler(rng, total)
    return LongitudinalNetwork(us, vs, ts, n_nodes, UNIT, shape)


def gen_network_scenario(scenario: str, rng, **params) -> LongitudinalNetwork:
    """Draw one longitudinal network from a named block design on [0, 1).

    sbm:        K equal communities; within pairs interact at a constant rate,
                between pairs at a Beta(2,5)-shaped rate, both integrating to s.
    dcsbm:      two communities, Beta(2,5)-shaped rates s (within) and p*s
                (between), per-node activity theta with ||theta|| = s.
    null-poisson: every pair at constant rate gamma.
    bipartite-null-poisson / bipartite-two-block: cross-group analogues.
    """
    rng = np.random.default_rng(rng)
    if scenario.startswith("bipartite"):
        m = int(params.get("m", 100))
        n = int(params.get("n", 100))
        iu, iv = np.divmod(np.arange(m * n), n)
        if scenario == "bipartite-null-poisson":
            rate = np.full(m * n, float(params.get("gamma", 1.0)))
        elif scenario == "bipartite-two-block":
            gamma = float(params.get("gamma", 1.0))
            ratio = float(params.get("ratio", 0.6))
            side1 = (iu < m // 2).astype(float)
            side2 = (iv < n // 2).astype(float)
            same = side1 == side2
            rate = np.where(same, gamma, ratio * gamma)
        else:
            raise ValueError(f"unknown network scenario {scenario!r}")
        counts = rng.poisson(rate)
        return _assemble_network(iu, iv, counts, lambda r, k: r.random(k),
                                 rng, m + n, shape=(m, n))

    n = int(params.get("n", 200))
    iu, iv = np.triu_indices(n, k=1)
    if scenario == "null-poisson":
        counts = rng.poisson(float(params.get("gamma", 1.0)), size=iu.size)
        return _assemble_network(iu, iv, counts, lambda r, k: r.random(k), rng, n)

    if scenario == "sbm":
        K = int(params.get("K", 2))
        s = float(params.get("s", 1.0))
        comm = np.minimum((np.arange(n) * K) // n, K - 1)
        same = comm[iu] == comm[iv]
        counts = rng.poisson(s, size=iu.size)  # both shapes integrate to s
        total_same = int(counts[same].sum())
        total_diff = int(counts[~same].sum())
        ts = np.empty(total_same + total_diff)
        ts[:total_same] = rng.random(total_same)
        ts[total_same:] = _beta_positions(rng, total_diff)
        us = np.concatenate([np.repeat(iu[same], counts[same]),
                             np.repeat(iu[~same], counts[~same])])
        vs = np.concatenate([np.repeat(iv[same], counts[same]),
                             np.repeat(iv[~same], counts[~same])])
        return LongitudinalNetwork(us, vs, ts, n, UNIT)

    if scenario == "dcsbm":
        s = float(params.get("s", 12.0))
        p = float(params.get("p", 1.0))
        theta = params.get("theta")
        if theta is None:
            theta = _theta_vector(params.get("het", "moderate"), n, s, rng)
        comm = (np.arange(n) >= n // 2).astype(int)
        same = comm[iu] == comm[iv]
        mass = np.where(same, s, p * s) * theta[iu] * theta[iv]
        counts = rng.poisson(mass)
        return _assemble_network(iu, iv, counts, _beta_positions, rng, n)

    raise ValueError(f"unknown network scenario {scenario!r}")


def sample_dcsbm_static(n: int, s: float, p: float, theta_kind: str,
                        rng) -> tuple[np.ndarray, np.ndarray]:
    """One aggregated (time-collapsed) count matrix from the two-block design;
    returns (matrix, theta)."""
    rng = np.random.default_rng(rng)
    theta = _theta_vector(theta_kind, n, s, rng)
    comm = (np.arange(n) >= n // 2).astype(int)
    rate = np.outer(theta, theta)
    rate[comm[:, None] != comm[None, :]] *= p
    upper = np.triu(rng.poisson(rate), k=1)
    return upper + upper.T, theta


def sample_flat_poisson_matrix(n: int, gamma: float, rng) -> np.ndarray:
    """Symmetric zero-diagonal matrix with iid Poisson(gamma) entries."""
    rng = np.random.default_rng(rng)
    upper = np.triu(rng.poisson(gamma, size=(n, n)), k=1)
    return upper + upper.T


def _kernel_matrix(positions: np.ndarray, sigma: float) -> np.ndarray:
    k = np.exp(-((positions[:, None] - positions[None, :]) ** 2)
               / (2.0 * sigma**2))
    np.fill_diagonal(k, 0.0)
    return k


def kernel_stat(marked: MarkedPool, sigma: float) -> float:
    """Sum over i != j of K(X_i, X_j) M_i M_j with a Gaussian kernel."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k = _kernel_matrix(marked.positions, sigma)
    m = marked.marks.astype(float)
    return float(m @ k @ m)


def kernel_two_sample(marked: MarkedPool, sigma: float, boot: int, rng) -> float:
    """Gaussian-kernel mark-interaction test with Monte Carlo calibration.

    The p-value is the fraction of Rademacher-mark replicates whose statistic
    is at least as extreme in magnitude as the observed one.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if boot < 1:
        raise ValueError("boot must be >= 1")
    n = len(marked)
    if n < 2:
        return 1.0
    rng = np.random.default_rng(rng)
    k = _kernel_matrix(marked.positions, sigma)
    m = marked.marks.astype(float)
    t_obs = float(m @ k @ m)
    signs = rng.integers(0, 2, size=(boot, n)).astype(float) * 2 - 1
    t_rep = np.einsum("bi,ij,bj->b", signs, k, signs)
    return float(np.mean(np.abs(t_rep) >= abs(t_obs)))


def _ks_statistic(pos_a: np.ndarray, pos_b: np.ndarray) -> float:
    if pos_a.size == 0 or pos_b.size == 0:
        return 0.0
    allx = np.sort(np.concatenate([pos_a, pos_b]))
    fa = np.searchsorted(np.sort(pos_a), allx, side="right") / pos_a.size
    fb = np.searchsorted(np.sort(pos_b), allx, side="right") / pos_b.size
    return float(np.abs(fa - fb).max())


def ks_two_sample(marked: MarkedPool, boot: int, rng) -> float:
    """Conditional two-sample Kolmogorov-Smirnov test with Monte Carlo p-value."""
    if boot < 1:
        raise ValueError("boot must be >= 1")
    pos = marked.positions
    obs_a = pos[marked.marks < 0]
    obs_b = pos[marked.marks > 0]
    if obs_a.size == 0 or obs_b.size == 0:
        return 1.0
    rng = np.random.default_rng(rng)
    d_obs = _ks_statistic(obs_a, obs_b)
    hits = 0
    for _ in range(boot):
        marks = rng.integers(0, 2, size=pos.size) * 2 - 1
        hits += _ks_statistic(pos[marks < 0], pos[marks > 0]) >= d_obs
    return hits / boot


@dataclass
class ExperimentSpec:
    """A named batch of simulations with every knob recorded."""

    scenario: str
    reps: int | None = None
    boot: int | None = None
    alphas: tuple[float, ...] = (0.05,)
    params: dict = field(default_factory=dict)
    seed: int = 0
    scale: str = "desk"

    def __post_init__(self):
        if self.scale not in ("desk", "paper"):
            raise ValueError("scale must be 'desk' or 'paper'")
        if self.reps is not None and self.reps < 1:
            raise ValueError("reps must be >= 1")


_SCALE_DEFAULTS = {
    "desk": {"reps": 300, "boot": 200},
    "paper": {"reps": 1000, "boot": 500},
}


def _base_row(spec: ExperimentSpec, reps: int, boot: int) -> dict:
    row = {"scenario": spec.scenario, "seed": spec.seed, "reps": reps,
           "boot": boot, "scale": spec.scale}
    row.update({f"param_{k}": v for k, v in spec.params.items()
                if not isinstance(v, (list, tuple, np.ndarray))})
    return row


def _mc_se(p_hat: float, reps: int) -> float:
    return math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / reps)


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Run a named simulation study; returns one dict per report row.

    Deterministic given the spec (including seed). Supported scenarios:
    two-sample-type1, two-sample-power, array-sym, array-dc, tw-hist, sgn-null.
    """
    defaults = _SCALE_DEFAULTS[spec.scale]
    reps = spec.reps if spec.reps is not None else defaults["reps"]
    boot = spec.boot if spec.boot is not None else defaults["boot"]
    handlers = {
        "two-sample-type1": _exp_two_sample,
        "two-sample-power": _exp_two_sample,
        "array-sym": _exp_array_sym,
        "array-dc": _exp_array_dc,
        "tw-hist": _exp_tw_hist,
        "sgn-null": _exp_sgn_null,
    }
    if spec.scenario not in handlers:
        raise ValueError(f"unknown experiment scenario {spec.scenario!r}")
    return handlers[spec.scenario](spec, reps, boot)


KNOWN_METHODS = ("MF", "MM", "KN1", "KN2", "KS")


def _two_sample_methods(params):
    methods = params.get("methods", KNOWN_METHODS)
    if isinstance(methods, str):
        methods = tuple(m.strip() for m in methods.split(","))
    methods = tuple(methods)
    unknown = set(methods) - set(KNOWN_METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    return methods


def _exp_two_sample(spec: ExperimentSpec, reps: int, boot: int) -> list[dict]:
    params = dict(spec.params)
    methods = _two_sample_methods(params)
    if spec.scenario == "two-sample-type1":
        case = params.get("case", "null-uniform")
        knob_values = [None]
        gen_id = case
    else:
        knob_values = list(params.get("p_values", (0.2, 0.4, 0.6, 0.8, 1.0)))
        gen_id = "piecewise"
    levels = params.get("levels")
    master = np.random.default_rng(np.random.SeedSequence(spec.seed))
    rejections = {(m, a, k): 0 for m in methods for a in spec.alphas
                  for k in knob_values}
    for knob in knob_values:
        gen_params = {} if knob is None else {"p": knob}
        streams = master.spawn(reps)
        for rep_rng in streams:
            na, nb = gen_two_sample_scenario(gen_id, rep_rng, **gen_params)
            marked = pool(na, nb)
            tree = build_equal_width(UNIT, levels or default_levels(len(marked)))
            for method in methods:
                if method in ("MF", "MM"):
                    tree_p = run_two_sample(
                        na, nb, tree, boot,
                        combiner="fisher" if method == "MF" else "min",
                        alpha=min(spec.alphas), rng=rep_rng.spawn(1)[0])
                    p_global = tree_p.node(0, 1).p_adj
                elif method in ("KN1", "KN2"):
                    sigma = 0.5 if method == "KN1" else 0.1
                    p_global = kernel_two_sample(marked, sigma, boot,
                                                 rep_rng.spawn(1)[0])
                else:
                    p_global = ks_two_sample(marked, boot, rep_rng.spawn(1)[0])
                for a in spec.alphas:
                    rejections[(method, a, knob)] += p_global <= a
    rows = []
    for (method, a, knob), hits in sorted(rejections.items(),
                                          key=lambda kv: str(kv[0])):
        row = _base_row(spec, reps, boot)
        row.update({"method": method, "alpha": a, "rejection_rate": hits / reps,
                    "mc_se": _mc_se(hits / reps, reps)})
        if knob is not None:
            row["p"] = knob
        rows.append(row)
    return rows


def _exp_array_sym(spec: ExperimentSpec, reps: int, boot: int) -> list[dict]:
    params = dict(spec.params)
    n = int(params.get("n", 200))
    K = int(params.get("K", 2))
    levels = int(params.get("levels", 4))
    s_values = list(params.get("s_values", (1.0,)))
    master = np.random.default_rng(np.random.SeedSequence(spec.seed))
    tree = build_equal_width(UNIT, levels)
    rows = []
    for s in s_values:
        hits = {a: 0 for a in spec.alphas}
        for rep_rng in master.spawn(reps):
            net = gen_network_scenario("sbm", rep_rng, n=n, K=K, s=s)
            cfg = NetworkTestConfig(statistic=params.get("stat", "eig"),
                                    levels=levels, boot=boot,
                                    alpha=min(spec.alphas))
            out = run_symmetric(net, tree, cfg, rep_rng.spawn(1)[0])
            for a in spec.alphas:
                hits[a] += out.node(0, 1).p_adj <= a
        for a in spec.alphas:
            row = _base_row(spec, reps, boot)
            row.update({"method": params.get("stat", "eig"), "alpha": a, "s": s,
                        "K": K, "n": n,
                        "rejection_rate": hits[a] / reps,
                        "mc_se": _mc_se(hits[a] / reps, reps)})
            rows.append(row)
    return rows


def _exp_array_dc(spec: ExperimentSpec, reps: int, boot: int) -> list[dict]:
    params = dict(spec.params)
    n = int(params.get("n", 100))
    s = float(params.get("s", 12.0))
    het = params.get("het", "moderate")
    stat = params.get("stat", "sgnq")
    levels = int(params.get("levels", 4))
    p_values = list(params.get("p_values", (0.6, 1.0)))
    master = np.random.default_rng(np.random.SeedSequence(spec.seed))
    tree = build_equal_width(UNIT, levels)
    rows = []
    for p in p_values:
        hits = {a: 0 for a in spec.alphas}
        for rep_rng in master.spawn(reps):
            net = gen_network_scenario("dcsbm", rep_rng, n=n, s=s, p=p, het=het)
            cfg = NetworkTestConfig(statistic=stat, levels=levels, boot=boot,
                                    alpha=min(spec.alphas))
            out = run_degree_corrected(net, tree, cfg, rep_rng.spawn(1)[0])
            for a in spec.alphas:
                hits[a] += out.node(0, 1).p_adj <= a
        for a in spec.alphas:
            row = _base_row(spec, reps, boot)
            row.update({"method": stat, "alpha": a, "p": p, "n": n, "s": s,
                        "het": het, "rejection_rate": hits[a] / reps,
                        "mc_se": _mc_se(hits[a] / reps, reps)})
            rows.append(row)
    return rows


def _exp_tw_hist(spec: ExperimentSpec, reps: int, boot: int) -> list[dict]:
    """Null eigenvalue statistics, raw and bootstrap-corrected, for plotting."""
    params = dict(spec.params)
    n = int(params.get("n", 300))
    gamma = float(params.get("gamma", 20.0))
    n_boot = int(params.get("correction_boot", 50))
    master = np.random.default_rng(np.random.SeedSequence(spec.seed))
    iu, iv = np.triu_indices(n, k=1)
    n_pairs = iu.size
    pvals = np.full(n_pairs, 1.0 / n_pairs)
    rows = []
    for draw, rng in enumerate(master.spawn(reps)):
        a = sample_flat_poisson_matrix(n, gamma, rng)
        lam = max_eigenvalue(center_scale(a))
        stat = n ** (2.0 / 3.0) * (lam - 2.0)
        total = int(a[iu, iv].sum())
        lams = np.empty(n_boot)
        for b in range(n_boot):
            counts = rng.multinomial(total, pvals)
            rep = np.zeros((n, n))
            rep[iu, iv] = counts
            rep += rep.T
            lams[b] = max_eigenvalue(center_scale(rep))
        corrected = MU_TW1 + SIGMA_TW1 * (lam - lams.mean()) / lams.std(ddof=1)
        row = _base_row(spec, reps, boot)
        row.update({"draw": draw, "stat": stat, "stat_corrected": float(corrected)})
        rows.append(row)
    return rows


def _exp_sgn_null(spec: ExperimentSpec, reps: int, boot: int) -> list[dict]:
    """Standardized signed-polygon statistics under the null, for plotting."""
    params = dict(spec.params)
    n = int(params.get("n", 300))
    s = float(params.get("s", math.sqrt(10.0 * n)))
    theta_kind = params.get("theta", "linear")
    p = float(params.get("p", 1.0))
    master = np.random.default_rng(np.random.SeedSequence(spec.seed))
    rows = []
    for draw, rng in enumerate(master.spawn(reps)):
        a, _ = sample_dcsbm_static(n, s, p, theta_kind, rng)
        eta, _ = eta_hat(a)
        h = float((eta**2).sum()) - 1.0
        z_t = sgnt(a) / (math.sqrt(6.0) * h**1.5)
        z_q = (sgnq(a) - 2.0 * h**2) / (math.sqrt(8.0) * h**2)
        row = _base_row(spec, reps, boot)
        row.update({"draw": draw, "z_t": float(z_t), "z_q": float(z_q)})
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols)
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2)
