"""Reference distributions: exact binomial tails, chi-square/Beta/normal, Tracy-Widom."""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaincc, ndtr
from scipy.stats import binom as _binom

__all__ = [
    "binom_two_sided_tail",
    "chi2_survival",
    "beta_1n_cdf",
    "normal_cdf",
    "tw1_cdf",
    "TW1Table",
    "load_tw1_table",
    "MU_TW1",
    "SIGMA_TW1",
    "ConfigurationError",
]

# Tracy-Widom (beta=1) mean and standard deviation, consistent with the
# bundled table to 1e-3 (checked in tests by numerical integration).
MU_TW1 = -1.2065335746
SIGMA_TW1 = 1.2679833496


class ConfigurationError(RuntimeError):
    """Raised when a required data asset is missing or malformed."""


def binom_two_sided_tail(m, t):
    """P(|Bin(1/2, m) - m/2| >= t), exact.

    Vectorized over both arguments; returns a float for scalar input.
    """
    m_arr = np.asarray(m)
    t_arr = np.asarray(t, dtype=float)
    if np.any(m_arr < 0):
        raise ValueError("m must be nonnegative")
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    half = m_arr / 2.0
    lower = _binom.cdf(np.floor(half - t_arr), m_arr, 0.5)
    upper = _binom.sf(np.ceil(half + t_arr) - 1.0, m_arr, 0.5)
    out = np.where(t_arr <= 0.0, 1.0, np.minimum(lower + upper, 1.0))
    if np.isscalar(m) and np.isscalar(t):
        return float(out)
    return out


def chi2_survival(df, x):
    """Right tail P(chi2_df >= x) via the regularized upper incomplete gamma."""
    df_arr = np.asarray(df)
    if np.any(df_arr < 1):
        raise ValueError("df must be >= 1")
    out = gammaincc(df_arr / 2.0, np.asarray(x, dtype=float) / 2.0)
    if np.isscalar(df) and np.isscalar(x):
        return float(out)
    return out


def beta_1n_cdf(n, x):
    """CDF at x of the minimum of n independent uniforms: 1 - (1-x)^n."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise ValueError("n must be >= 1")
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = -np.expm1(n_arr * np.log1p(-np.minimum(x_arr, 1.0)))
    out = np.where(x_arr >= 1.0, 1.0, out)
    if np.isscalar(n) and np.isscalar(x):
        return float(out)
    return out


def normal_cdf(z):
    """Standard normal CDF."""
    out = ndtr(np.asarray(z, dtype=float))
    if np.isscalar(z):
        return float(out)
    return out


class TW1Table:
    """Tabulated Tracy-Widom (beta=1) CDF with monotone cubic interpolation."""

    def __init__(self, grid: np.ndarray, cdf: np.ndarray,
                 mean: float = MU_TW1, sd: float = SIGMA_TW1):
        grid = np.asarray(grid, dtype=float)
        cdf = np.asarray(cdf, dtype=float)
        if grid.ndim != 1 or grid.shape != cdf.shape or grid.size < 4:
            raise ConfigurationError("table must give matching x and cdf columns")
        if np.any(np.diff(grid) <= 0):
            raise ConfigurationError("table grid must be strictly increasing")
        if np.any(np.diff(cdf) < 0) or cdf[0] < 0 or cdf[-1] > 1:
            raise ConfigurationError("table cdf must be nondecreasing in [0, 1]")
        self.grid = grid
        self.cdf_values = cdf
        self.mean = float(mean)
        self.sd = float(sd)
        self._interp = PchipInterpolator(grid, cdf, extrapolate=False)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = self._interp(x_arr)
        out = np.where(x_arr <= self.grid[0], self.cdf_values[0], out)
        out = np.where(x_arr >= self.grid[-1], self.cdf_values[-1], out)
        out = np.clip(out, 0.0, 1.0)
        if np.isscalar(x):
            return float(out)
        return out

    @classmethod
    def from_csv(cls, path) -> "TW1Table":
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1)
        except OSError as exc:
            raise ConfigurationError(f"cannot read Tracy-Widom table: {exc}") from exc
        if data.ndim != 2 or data.shape[1] != 2:
            raise ConfigurationError("Tracy-Widom table must have columns x,cdf")
        return cls(data[:, 0], data[:, 1])


_DEFAULT_TABLE: TW1Table | None = None


def load_tw1_table(path: str | Path | None = None) -> TW1Table:
    """Load (and cache) the Tracy-Widom table; `path` overrides the bundled asset."""
    global _DEFAULT_TABLE
    if path is not None:
        _DEFAULT_TABLE = TW1Table.from_csv(path)
        return _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        ref = importlib.resources.files("msbin").joinpath("data/tw1_cdf.csv")
        with importlib.resources.as_file(ref) as p:
            _DEFAULT_TABLE = TW1Table.from_csv(p)
    return _DEFAULT_TABLE


def tw1_cdf(x):
    """Tracy-Widom (beta=1) CDF from the bundled table."""
    return load_tw1_table().cdf(x)
