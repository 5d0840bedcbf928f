"""Regenerate the bundled Tracy-Widom (beta=1) CDF table.

Integrates the Hastings-McLeod solution of Painleve II backwards from the
Airy regime and writes src/msbin/data/tw1_cdf.csv (columns: x, cdf).
Run from the repository root:

    python3 tools/gen_tw1_table.py
"""

import pathlib

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import airy

S_START = 10.0
X_LO, X_HI, STEP = -10.0, 6.0, 0.005

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "msbin" / "data" / "tw1_cdf.csv"


def _rhs(s, y):
    q, qp, i1, j2, e2 = y
    return [qp, s * q + 2.0 * q**3, -q, -q * q, -s * q * q]


def main():
    ai = airy(S_START)
    y0 = [
        ai[0],
        ai[1],
        quad(lambda x: airy(x)[0], S_START, np.inf)[0],
        quad(lambda x: airy(x)[0] ** 2, S_START, np.inf)[0],
        quad(lambda x: x * airy(x)[0] ** 2, S_START, np.inf)[0],
    ]
    grid = np.arange(X_HI, X_LO - 1e-9, -STEP)
    sol = solve_ivp(
        _rhs, (S_START, X_LO), y0,
        method="DOP853", rtol=1e-12, atol=1e-14, t_eval=grid,
    )
    if not sol.success:
        raise RuntimeError(sol.message)
    s = sol.t[::-1]
    _, _, i1, j2, e2 = (arr[::-1] for arr in sol.y)
    # F2 = exp(-int (x-s) q^2);  F1 = exp(-int q / 2) * sqrt(F2)
    cdf = np.exp(-0.5 * i1 - 0.5 * (e2 - s * j2))
    cdf = np.clip(cdf, 0.0, 1.0)
    if np.any(np.diff(cdf) < 0):
        raise RuntimeError("generated CDF is not monotone")

    pdf = np.gradient(cdf, s)
    mean = np.trapezoid(s * pdf, s)
    sd = np.sqrt(np.trapezoid((s - mean) ** 2 * pdf, s))
    print(f"mean = {mean:.7f} (published -1.2065336)")
    print(f"sd   = {sd:.7f} (published  1.2679833)")
    if abs(mean + 1.2065336) > 5e-4 or abs(sd - 1.2679833) > 5e-4:
        raise RuntimeError("moments drifted from published values")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w") as fh:
        fh.write("x,cdf\n")
        for xi, ci in zip(s, cdf):
            fh.write(f"{xi:.10g},{ci:.12e}\n")
    print(f"wrote {OUT} ({len(s)} rows)")


if __name__ == "__main__":
    main()
