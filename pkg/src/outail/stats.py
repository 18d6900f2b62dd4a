"""Estimator statistics: batch-means errors, KS distances, level-set masses.

Every reduction here consumes a full per-sample array and reduces it in a
fixed order, so results do not depend on how the samples were produced
(worker count, chunk layout).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .numeric import gauss_interval_mass

N_BATCHES = 32

# Asymptotic 1% critical constants for KS statistics.
KS_ONE_SAMPLE_CRIT = 1.63
KS_TWO_SAMPLE_CRIT = 1.628


def batch_means(values: np.ndarray, n_batches: int = N_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of a sample.

    Splits the sample into ``n_batches`` contiguous batches (sizes differing
    by at most one) and estimates the SE of the grand mean from the spread of
    batch means.  Returns (mean, se); se is 0 when the spread is degenerate.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("batch_means needs at least one sample")
    mean = float(values.mean())
    if n < 2 * n_batches:
        se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return mean, se
    batches = np.array_split(values, n_batches)
    bmeans = np.array([b.mean() for b in batches])
    sizes = np.array([b.size for b in batches], dtype=float)
    grand = float(bmeans @ sizes / n)
    var_bm = float(((bmeans - grand) ** 2 * sizes).sum() / (n_batches - 1))
    return mean, float(np.sqrt(var_bm / n))


def mean_ci(values: np.ndarray, z: float = 3.0) -> tuple[float, float]:
    """Mean and z-sigma half-width from batch means."""
    m, se = batch_means(values)
    return m, z * se


def ks_one_sample(samples: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a CDF callable."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    f = np.asarray(cdf(xs), dtype=float)
    grid = np.arange(1, n + 1) / n
    return float(np.maximum(grid - f, f - (grid - 1.0 / n)).max())


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample KS distance: sup over thresholds of the empirical CDF gap."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / a.size
    fb = np.searchsorted(b, allv, side="right") / b.size
    return float(np.abs(fa - fb).max())


class DenseCdf:
    """Quadrature CDF of a 1-D density against the Gaussian, on a dense grid.

    Integrates density(x)*phi(x) by the trapezoid rule on a uniform grid and
    normalizes the far-right value to 1, then evaluates by linear
    interpolation.
    """

    def __init__(self, log_density_fn, halfwidth: float = 12.0, n_grid: int = 2**16 + 1):
        xs = np.linspace(-halfwidth, halfwidth, n_grid)
        logphi = -0.5 * xs * xs - 0.5 * np.log(2.0 * np.pi)
        dens = np.exp(np.asarray(log_density_fn(xs)) + logphi)
        h = xs[1] - xs[0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * h)])
        self.xs = xs
        self.total = float(cum[-1])
        self.cdf_grid = cum / self.total

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.cdf_grid)


def superlevel_gamma_mass(
    log_value_fn,
    log_level: float,
    halfwidth: float = 12.0,
    n_grid: int = 8193,
    xtol: float = 1e-12,
) -> float:
    """gamma_1-measure of the 1-D super-level set {x : g(x) > log_level}.

    Locates sign changes of g - log_level on a dense grid, refines each
    crossing by bisection, and sums the Gaussian mass of the resulting
    intervals.  The function is assumed continuous with finitely many
    crossings resolved by the grid.
    """
    xs = np.linspace(-halfwidth, halfwidth, n_grid)
    diff = np.asarray(log_value_fn(xs)) - log_level
    above = diff > 0
    if not above.any():
        return 0.0
    f = lambda x: float(np.ravel(log_value_fn(np.atleast_1d(x)))[0]) - log_level

    edges = []
    flips = np.nonzero(above[1:] != above[:-1])[0]
    for i in flips:
        edges.append(brentq(f, xs[i], xs[i + 1], xtol=xtol))
    # assemble intervals in increasing order
    bounds = [-np.inf] + edges + [np.inf]
    mass = 0.0
    state = bool(above[0])
    for a, b in zip(bounds[:-1], bounds[1:]):
        if state:
            lo = a if np.isfinite(a) else -halfwidth * 10
            hi = b if np.isfinite(b) else halfwidth * 10
            mass += gauss_interval_mass(lo, hi)
        state = not state
    return float(mass)
