"""Self-contained statistical utilities: KS tests, log-log regression, quadrature.

Pure functions, no randomness.  Sample sizes in the experiments are >= 1e3,
so KS p-values use the asymptotic Kolmogorov series (truncated at 100 terms)
with the usual small-sample correction; exact tables are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegressionFit",
    "binomial_estimate",
    "kolmogorov_survival",
    "ks_one_sample",
    "ks_two_sample",
    "loglog_fit",
    "gauss_integral",
    "smooth_bump",
    "rayleigh_cdf",
]


def binomial_estimate(hits: int, count: int) -> tuple[float, float]:
    """Proportion and its exact binomial standard error."""
    if count < 1:
        raise ValueError("count must be >= 1")
    p = hits / count
    return p, math.sqrt(p * (1.0 - p) / count)


def kolmogorov_survival(t: float) -> float:
    """Q(t) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 t^2).

    Below t = 0.8 the alternating series decays too slowly to truncate,
    so the theta-transformed form of the CDF is used there instead.
    """
    if t <= 0.0:
        return 1.0
    if t < 0.8:
        cdf = math.sqrt(2.0 * math.pi) / t * sum(
            math.exp(-((2 * j - 1) ** 2) * math.pi**2 / (8.0 * t * t))
            for j in range(1, 20))
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * t * t)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def ks_one_sample(samples: np.ndarray, cdf) -> tuple[float, float]:
    """Sup distance between the empirical CDF of sorted `samples` and `cdf`.

    Returns (distance, asymptotic p-value).  The input must already be
    sorted ascending; unsorted input is rejected rather than silently
    sorted so callers cannot accidentally double-sort large arrays.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.size < 8:
        raise ValueError("need at least 8 samples in a 1-d array")
    if np.any(np.diff(s) < 0.0):
        raise ValueError("samples must be sorted ascending")
    n = s.size
    f = np.asarray(cdf(s), dtype=float)
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("cdf must be nondecreasing")
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - f))
    d_minus = float(np.max(f - (grid - 1.0 / n)))
    dist = max(d_plus, d_minus, 0.0)
    rn = math.sqrt(n)
    p = kolmogorov_survival((rn + 0.12 + 0.11 / rn) * dist)
    return dist, p


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sample KS distance and asymptotic p-value (inputs need not be sorted)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 8 or b.size < 8:
        raise ValueError("need at least 8 samples on each side")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    dist = float(np.max(np.abs(fa - fb)))
    neff = a.size * b.size / (a.size + b.size)
    rn = math.sqrt(neff)
    p = kolmogorov_survival((rn + 0.12 + 0.11 / rn) * dist)
    return dist, p


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_std_error: float
    r_squared: float


def loglog_fit(points, weights=None) -> RegressionFit:
    """Weighted least squares of ln p against ln n for (n, p) pairs.

    Weights are inverse-variance style relative weights on the log scale.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    n = np.array([float(p[0]) for p in pts])
    p = np.array([float(q[1]) for q in pts])
    if np.any(n <= 0.0) or np.any(p <= 0.0):
        raise ValueError("log-log fit needs strictly positive coordinates")
    w = np.ones_like(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != n.shape or np.any(w <= 0.0):
        raise ValueError("weights must be positive and match the points")

    x = np.log(n)
    y = np.log(p)
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx <= 0.0:
        raise ValueError("degenerate abscissae")
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar

    resid = y - intercept - slope * x
    dof = max(1, len(pts) - 2)
    s2 = (w * resid**2).sum() / dof
    se = math.sqrt(s2 / sxx)
    syy = (w * (y - ybar) ** 2).sum()
    r2 = 0.0 if syy <= 0.0 else 1.0 - (w * resid**2).sum() / syy
    return RegressionFit(
        slope=float(slope),
        intercept=float(intercept),
        slope_std_error=float(se),
        r_squared=float(min(1.0, max(0.0, r2))),
    )


def gauss_integral(phi, center: float, width: float, step: float) -> float:
    """Trapezoid quadrature of phi(y) * exp(-(y-center)^2 / (2 width^2)).

    Truncated at +/- 8 widths (dropped Gaussian mass < 1e-15).  `phi` must
    accept a numpy array.  Relative error <= 1e-6 for smooth phi when
    step <= width/200 or so; the caller picks the step.
    """
    if step <= 0.0 or width <= 0.0:
        raise ValueError("step and width must be positive")
    half = 8.0 * width
    m = max(16, int(math.ceil(2.0 * half / step)))
    y = np.linspace(center - half, center + half, m + 1)
    vals = np.asarray(phi(y), dtype=float) * np.exp(-((y - center) ** 2) / (2.0 * width**2))
    return float(np.trapezoid(vals, y))


def smooth_bump(lo: float, hi: float, edge: float):
    """C1 plateau function: 0 outside [lo, hi], 1 on [lo+edge, hi-edge].

    Cubic smoothstep ramps at both ends; a continuous compactly supported
    test function for the averaged limit checks.  Vectorized over numpy
    arrays.
    """
    if not (hi - lo > 2.0 * edge > 0.0):
        raise ValueError("need hi - lo > 2*edge > 0")

    def phi(y):
        y = np.asarray(y, dtype=float)
        t_up = np.clip((y - lo) / edge, 0.0, 1.0)
        t_dn = np.clip((hi - y) / edge, 0.0, 1.0)
        ramp_up = t_up * t_up * (3.0 - 2.0 * t_up)
        ramp_dn = t_dn * t_dn * (3.0 - 2.0 * t_dn)
        return np.minimum(ramp_up, ramp_dn)

    return phi


def rayleigh_cdf(t):
    """CDF 1 - exp(-t^2/2) of the standard Rayleigh law, 0 for t < 0."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 0.0, 1.0 - np.exp(-0.5 * t * t), 0.0)
