"""Multiscale binning tests for point processes and longitudinal networks.

Builds a hierarchical dyadic partition of the event domain, tests a
discretized null in every bin, combines the per-bin p-values within and
across resolution levels, calibrates by resampling under the null, and
adjusts so the whole tree of p-values is simultaneously valid with
family-wise error control.
"""

from .combine import (
    CombinedTable,
    PvalGrid,
    PvalNode,
    PvalTree,
    bonferroni_calibrate,
    dp_all_levels,
    fisher_combine,
    meinshausen_adjust,
    min_across_resolutions,
    min_combine,
    randomized_pvalue,
    rejection_set,
    resample_calibrate,
)
from .dists import (
    MU_TW1,
    SIGMA_TW1,
    beta_1n_cdf,
    binom_two_sided_tail,
    chi2_survival,
    normal_cdf,
    tw1_cdf,
)
from .longitudinal import (
    NetworkTestConfig,
    run_asymmetric,
    run_degree_corrected,
    run_symmetric,
)
from .netstats import LongitudinalNetwork
from .partition import (
    Domain,
    PartitionTree,
    build_equal_count,
    build_equal_width,
    descendants,
)
from .pointproc import IntensitySpec, PointPattern, bin_counts, sample_poisson
from .twosample import MarkedPool, pool, rademacher_resample, run_two_sample

__version__ = "0.1.0"
