import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ks_distance
from msbin.combine import (
    CombinedTable,
    PvalGrid,
    PvalTree,
    bonferroni_calibrate,
    dp_all_levels,
    fisher_combine,
    meinshausen_adjust,
    min_across_resolutions,
    min_combine,
    p_tilde_batched,
    p_tilde_levels,
    randomized_pvalue,
    rejection_set,
    resample_calibrate,
)
from msbin.dists import binom_two_sided_tail


def random_grid(rng, levels):
    return PvalGrid({r: rng.random(2**r) for r in range(1, levels + 1)},
                    root=float(rng.random()))


class TestRandomizedPvalue:
    def test_extreme_count_at_u_one(self):
        assert randomized_pvalue(0, 4, 1.0) == pytest.approx(0.125)

    def test_interpolates_neighbor_tails(self):
        # S(0) = 1, S(1) = 0.625 for m = 4
        assert randomized_pvalue(2, 4, 0.5) == pytest.approx(0.8125)

    def test_empty_bin_returns_the_uniform_draw(self):
        assert randomized_pvalue(0, 0, 0.7) == pytest.approx(0.7)

    def test_rejects_count_above_total(self):
        with pytest.raises(ValueError):
            randomized_pvalue(5, 4, 0.5)

    def test_never_exceeds_unrandomized(self):
        us = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        for m in range(0, 41):
            for a in range(0, m + 1):
                t = abs(a - m / 2)
                cap = binom_two_sided_tail(m, t)
                vals = randomized_pvalue(np.full(5, a), np.full(5, m), us)
                assert np.all(vals <= cap + 1e-15)

    def test_null_uniformity_smoke(self):
        rng = np.random.default_rng(0)
        for m in (1, 5, 20):
            a = rng.binomial(m, 0.5, size=20_000)
            u = rng.random(20_000)
            vals = randomized_pvalue(a, np.full(a.size, m), u)
            assert ks_distance(vals, lambda x: np.clip(x, 0, 1)) < 0.02


class TestCombiners:
    def test_fisher_all_ones(self):
        assert fisher_combine([1.0, 1.0]) == pytest.approx(1.0)

    def test_fisher_exp_inputs(self):
        got = fisher_combine([math.exp(-1), math.exp(-1)])
        assert got == pytest.approx(3 * math.exp(-2), abs=1e-12)

    def test_fisher_single_input_is_identity(self):
        assert fisher_combine([0.5]) == pytest.approx(0.5, abs=1e-12)

    def test_min_half_power_four(self):
        assert min_combine([0.5, 0.5, 0.5, 0.5]) == pytest.approx(0.9375)

    def test_min_with_zero(self):
        assert min_combine([0.0, 0.9, 0.4]) == 0.0

    def test_min_single_input_is_identity(self):
        assert min_combine([0.3]) == pytest.approx(0.3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fisher_combine([])
        with pytest.raises(ValueError):
            min_combine([])

    @pytest.mark.parametrize("k", [1, 2, 8])
    def test_uniformity_under_null(self, k):
        from msbin.dists import beta_1n_cdf, chi2_survival

        rng = np.random.default_rng(k)
        draws = rng.random((100_000, k))
        # the scalar functions agree with their vectorized forms ...
        fisher_vec = chi2_survival(2 * k, -2 * np.log(draws).sum(axis=1))
        min_vec = beta_1n_cdf(k, draws.min(axis=1))
        for row, fv, mv in zip(draws[:2_000], fisher_vec, min_vec):
            assert fisher_combine(row) == pytest.approx(fv, abs=1e-12)
            assert min_combine(row) == pytest.approx(mv, abs=1e-12)
        # ... and the null distribution is uniform at scale
        uniform = lambda x: np.clip(x, 0, 1)
        assert ks_distance(fisher_vec, uniform) < 0.01
        assert ks_distance(min_vec, uniform) < 0.01


class TestDynamicProgram:
    def test_known_level_two_grid(self):
        e = math.exp(-1)
        grid = PvalGrid({1: [0.5, 0.8], 2: [e, e, 1.0, 1.0]})
        table = dp_all_levels(grid, "fisher")
        assert table.entry(1, 1, 2) == pytest.approx(3 * math.exp(-2), abs=1e-12)
        assert table.entry(1, 2, 2) == pytest.approx(1.0)

    def test_same_level_is_single_value_combination(self):
        grid = PvalGrid({1: [0.5, 0.2]})
        table = dp_all_levels(grid, "fisher")
        assert table.entry(1, 1, 1) == pytest.approx(0.5, abs=1e-12)

    def test_all_ones_grid(self):
        grid = PvalGrid({1: [1.0, 1.0], 2: [1.0] * 4})
        table = dp_all_levels(grid, "fisher")
        for s in range(0, 3):
            for j in range(1, 2**s + 1):
                for r in table.resolutions(s):
                    assert table.entry(s, j, r) == pytest.approx(1.0)

    @pytest.mark.parametrize("combiner", ["fisher", "min"])
    def test_matches_direct_recomputation(self, combiner):
        from msbin.partition import descendants

        rng = np.random.default_rng(42)
        combine = fisher_combine if combiner == "fisher" else min_combine
        for _ in range(10):
            levels = int(rng.integers(1, 7))
            grid = random_grid(rng, levels)
            table = dp_all_levels(grid, combiner)
            for s in range(0, levels + 1):
                for j in range(1, 2**s + 1):
                    for r in range(max(s, 1), levels + 1):
                        direct = combine(
                            [grid.level(r)[l - 1]
                             for l in descendants(s, j, r)])
                        assert table.entry(s, j, r) == pytest.approx(
                            direct, abs=1e-12)

    def test_include_root_adds_identity_entry(self):
        grid = PvalGrid({1: [0.5, 0.5]}, root=0.123)
        table = dp_all_levels(grid, "fisher", include_root=True)
        assert table.entry(0, 1, 0) == pytest.approx(0.123, abs=1e-12)
        with pytest.raises(ValueError):
            dp_all_levels(PvalGrid({1: [0.5, 0.5]}), "fisher", include_root=True)

    def test_batched_matches_per_grid(self):
        rng = np.random.default_rng(3)
        levels = 4
        grids = [random_grid(rng, levels) for _ in range(7)]
        stacked = {r: np.stack([g.level(r) for g in grids])
                   for r in range(1, levels + 1)}
        root = np.array([g.root for g in grids])
        batched = p_tilde_batched(stacked, "fisher", root)
        for b, grid in enumerate(grids):
            single = p_tilde_levels(grid, "fisher", include_root=True)
            for s in range(levels + 1):
                assert np.allclose(batched[s][b], single[s], atol=1e-14)

    def test_p_tilde_is_min_over_table(self):
        rng = np.random.default_rng(9)
        grid = random_grid(rng, 3)
        table = dp_all_levels(grid, "min")
        tilde = p_tilde_levels(grid, "min")
        for s in range(0, 4):
            for j in range(1, 2**s + 1):
                assert tilde[s][j - 1] == pytest.approx(
                    min_across_resolutions(table, s, j), abs=1e-14)


class TestMinAcrossResolutions:
    def test_takes_minimum(self):
        table = CombinedTable(3, {(1, 1): np.array([0.4, 1.0]),
                                  (1, 2): np.array([0.1, 1.0]),
                                  (1, 3): np.array([0.9, 1.0])})
        assert min_across_resolutions(table, 1, 1) == pytest.approx(0.1)

    def test_single_entry(self):
        table = CombinedTable(1, {(1, 1): np.array([0.7])})
        assert min_across_resolutions(table, 1, 1) == pytest.approx(0.7)

    def test_all_ones(self):
        table = CombinedTable(2, {(2, 2): np.array([1.0, 1.0, 1.0, 1.0])})
        assert min_across_resolutions(table, 2, 3) == 1.0

    def test_missing_node(self):
        table = CombinedTable(1, {(1, 1): np.array([0.7])})
        with pytest.raises(ValueError):
            min_across_resolutions(table, 2, 1)


class TestCalibration:
    def test_bonferroni_examples(self):
        assert bonferroni_calibrate(0.01, 0, 4) == pytest.approx(0.05)
        assert bonferroni_calibrate(0.5, 4, 4) == pytest.approx(0.5)
        assert bonferroni_calibrate(0.9, 0, 4) == 1.0

    def test_resample_fraction(self):
        assert resample_calibrate(0.2, [0.1, 0.3, 0.5, 0.05]) == pytest.approx(0.5)

    def test_resample_extremes(self):
        assert resample_calibrate(0.01, [0.5, 0.9]) == 0.0
        assert resample_calibrate(1.0, [0.5, 0.9, 1.0]) == 1.0

    def test_resample_rejects_empty(self):
        with pytest.raises(ValueError):
            resample_calibrate(0.5, [])


class TestMeinshausen:
    def test_two_sample_factor(self):
        out = meinshausen_adjust([[0.5], [0.01, 1.0], [1, 1, 1, 1],
                                  [1] * 8], 3, reverse_logic=True)
        assert out[1][0] == pytest.approx(0.02)

    def test_terminal_factor_differs_by_logic(self):
        levels = [[1.0], [1.0] * 2, [1.0] * 4, [0.01] * 8]
        with_logic = meinshausen_adjust(levels, 3, reverse_logic=True)
        without = meinshausen_adjust(levels, 3, reverse_logic=False)
        assert with_logic[3][0] == pytest.approx(0.04)
        assert without[3][0] == pytest.approx(0.08)

    def test_root_untouched(self):
        out = meinshausen_adjust([[0.5], [1.0, 1.0]], 1, reverse_logic=True)
        assert out[0][0] == pytest.approx(0.5)

    @given(st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
    @settings(deadline=None, derandomize=True)
    def test_monotone_in_p_check(self, p1, p2):
        lo, hi = sorted([p1, p2])
        levels = 3
        out_lo = meinshausen_adjust([[1.0], [lo, 1.0], [1.0] * 4, [1.0] * 8],
                                    levels, True)
        out_hi = meinshausen_adjust([[1.0], [hi, 1.0], [1.0] * 4, [1.0] * 8],
                                    levels, True)
        assert out_lo[1][0] <= out_hi[1][0]


class TestRejectionSet:
    def test_blocked_descendant(self):
        p_adj = [[0.01], [0.2, 1.0], [0.01, 1.0, 1.0, 1.0]]
        flags = rejection_set(p_adj, 0.05)
        assert flags[0][0]
        assert not flags[1][0]
        assert not flags[2][0]  # own p fine, parent blocks

    def test_no_rejections(self):
        flags = rejection_set([[1.0], [1.0, 1.0]], 0.05)
        assert not any(np.any(f) for f in flags)

    def test_all_rejected(self):
        flags = rejection_set([[0.0], [0.0, 0.0]], 0.05)
        assert all(np.all(f) for f in flags)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            rejection_set([[0.5]], 1.5)

    def test_heredity_on_random_trees(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            levels = int(rng.integers(1, 5))
            p_adj = [rng.random(2**s) for s in range(levels + 1)]
            flags = rejection_set(p_adj, 0.3)
            for s in range(1, levels + 1):
                parent = np.repeat(flags[s - 1], 2)
                assert np.all(~flags[s] | parent)


class TestPvalTree:
    def _tree(self):
        from msbin.combine import PvalNode

        nodes = [PvalNode(0, 1, 0.0, 1.0, 0.01, 0.02, 0.02, True),
                 PvalNode(1, 1, 0.0, 0.5, 0.4, 0.5, 1.0, False),
                 PvalNode(1, 2, 0.5, 1.0, 0.01, 0.04, 0.08, False)]
        return PvalTree(0.05, nodes)

    def test_json_round_trip(self):
        tree = self._tree()
        again = PvalTree.from_json(tree.to_json())
        assert again.to_json() == tree.to_json()

    def test_render_marks_rejections(self):
        text = self._tree().render_text()
        lines = text.splitlines()
        assert lines[0].endswith("p=0.020*")
        assert lines[1].strip().startswith("(1,1)")
        assert "*" not in lines[1]
