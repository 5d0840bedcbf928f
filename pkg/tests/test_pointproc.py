import numpy as np
import pytest

from msbin.partition import Domain, build_equal_width
from msbin.pointproc import IntensitySpec, PointPattern, bin_counts, sample_poisson

UNIT = Domain(0.0, 1.0)


class TestSamplePoisson:
    def test_zero_intensity_always_empty(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert len(sample_poisson(IntensitySpec.constant(0.0), UNIT, rng)) == 0

    def test_constant_mean_count(self):
        rng = np.random.default_rng(1)
        lam = IntensitySpec.constant(50.0)
        counts = [len(sample_poisson(lam, UNIT, rng)) for _ in range(10_000)]
        assert abs(np.mean(counts) - 50.0) < 0.25

    def test_piecewise_pieces_average_out(self):
        # (1-p), (1+p), 1 pieces at full signal still integrate to the base rate
        lam = IntensitySpec.piecewise([0.0, 0.25, 0.5, 1.0], [0.0, 100.0, 50.0])
        rng = np.random.default_rng(2)
        counts = [len(sample_poisson(lam, UNIT, rng)) for _ in range(4_000)]
        assert abs(np.mean(counts) - 50.0) < 3 * np.sqrt(50 / 4_000)

    def test_bad_bound_detected(self):
        lam = IntensitySpec.from_callable(lambda x: np.full_like(x, 2.0), 0.5)
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            for _ in range(100):
                sample_poisson(lam, UNIT, rng)

    def test_events_inside_domain_and_sorted(self):
        rng = np.random.default_rng(4)
        pat = sample_poisson(IntensitySpec.constant(200.0), Domain(3.0, 5.0), rng)
        assert np.all(np.diff(pat.events) >= 0)
        assert pat.events.min() >= 3.0 and pat.events.max() < 5.0


class TestIntensityForms:
    def test_sinusoid_window(self):
        lam = IntensitySpec.sinusoid(550.0, 275.0, 4 * np.pi, 0.25,
                                     window=(0.25, 0.75))
        assert lam.rate(np.array([0.1]))[0] == 550.0
        assert lam.rate(np.array([0.375]))[0] == pytest.approx(825.0)
        assert lam.rate(np.array([0.25]))[0] == pytest.approx(550.0)

    def test_scaled_beta_integrates_to_mass(self):
        lam = IntensitySpec.scaled_beta(40.0)
        xs = np.linspace(0, 1, 200_001)
        integral = np.trapezoid(lam.rate(xs), xs)
        assert integral == pytest.approx(40.0, rel=1e-6)


class TestBinCounts:
    def test_direct_count(self):
        pat = PointPattern(np.array([0.1, 0.6, 0.7]), UNIT)
        tree = build_equal_width(UNIT, 1)
        assert bin_counts(pat, tree, 1).tolist() == [1, 2]

    def test_empty_pattern(self):
        tree = build_equal_width(UNIT, 2)
        assert bin_counts(PointPattern(np.array([]), UNIT), tree, 2).tolist() == [0] * 4

    def test_half_open_boundary(self):
        pat = PointPattern(np.array([0.5]), UNIT)
        tree = build_equal_width(UNIT, 1)
        assert bin_counts(pat, tree, 1).tolist() == [0, 1]

    def test_aggregation_consistency(self):
        rng = np.random.default_rng(5)
        pat = sample_poisson(IntensitySpec.constant(100.0), UNIT, rng)
        tree = build_equal_width(UNIT, 4)
        for r in range(1, 4):
            coarse = bin_counts(pat, tree, r)
            fine = bin_counts(pat, tree, r + 1)
            assert np.array_equal(coarse, fine.reshape(-1, 2).sum(axis=1))

    def test_disjoint_bins_uncorrelated(self):
        rng = np.random.default_rng(6)
        tree = build_equal_width(UNIT, 1)
        lam = IntensitySpec.constant(30.0)
        counts = np.array([bin_counts(sample_poisson(lam, UNIT, rng), tree, 1)
                           for _ in range(10_000)])
        corr = np.corrcoef(counts[:, 0], counts[:, 1])[0, 1]
        assert abs(corr) < 0.05
