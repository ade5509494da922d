"""Diagnostics for the almost-sure convergence of ``c_n M[n, n]`` to zero.

Two sufficient conditions are estimated by Monte Carlo on a geometric
grid of ``n``:

* ``term_a(n) = c_n^p E|S[n0, n]|^p`` and the tail sums
  ``term_b(n) = sum_{k >= n} (c_k^p - c_{k+1}^p) E|S[n, k]|^p`` should
  tend to zero;
* ``sum_n c_n E^{1/p}|R_n|^p`` should be finite.

Slopes of log-log fits summarise the decay.  None of this proves an
almost-sure statement; it shows whether the rates look right.
"""

from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from ._util import as_rng, fsum_mean_columns, loglog_slope
from .arrays import validate_schedule


def geometric_grid(lo, hi):
    """Powers of two in ``[lo, hi]``."""
    k0 = max(1, math.ceil(math.log2(max(lo, 2))))
    k1 = int(math.floor(math.log2(hi)))
    return np.array([2**k for k in range(k0, k1 + 1)], dtype=int)


def _interp_partial_sums(nodes, values, upto):
    """Sum over every integer ``2..n`` of a log-log interpolation of ``values`` at ``nodes``.

    Returns the cumulative sum evaluated at each node that is ``>= upto[0]``.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    ns = np.arange(2, int(nodes[-1]) + 1, dtype=float)
    if np.all(values > 0):
        dense = np.exp(np.interp(np.log(ns), np.log(nodes), np.log(values)))
    else:
        dense = np.interp(ns, nodes, values)
    csum = np.cumsum(dense)
    return np.array([csum[int(n) - 2] for n in upto])


def _power_tail(ks, summand):
    """Extrapolated ``sum_{k > K} a k^s`` from a power-law fit to the last decade."""
    pos = summand > 0
    if pos.sum() < 2:
        return 0.0 if np.all(summand == 0) else math.nan
    s = loglog_slope(ks[pos], summand[pos])
    if not s < -1:
        return math.inf
    a = math.exp(np.mean(np.log(summand[pos]) - s * np.log(ks[pos])))
    K = ks[-1]
    return a * K ** (s + 1) / (-(s + 1))


@dataclass
class SllnReport:
    grid: np.ndarray
    n0s: tuple
    p: float
    term_a: dict
    term_b: np.ndarray
    term_b_tail: np.ndarray
    r_increment: np.ndarray
    r_partial_sum: np.ndarray
    slopes: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def term_a_worst(self):
        """Largest ``term_a(n)`` over the ``n0`` values with ``n0 <= n``."""
        stack = np.vstack([self.term_a[n0] for n0 in self.n0s])
        return np.nanmax(stack, axis=0)


def corollary1_terms(dist, w, n0=1, horizon=2**12, replicates=1000, seed=0, grid=None):
    """Monte Carlo estimates of both convergence conditions.

    ``n0`` may be a single anchor or a sequence; ``term_a`` is reported for
    each.  ``term_b`` is truncated at ``horizon`` and ``term_b_tail`` is a
    power-law extrapolation of the omitted tail (an estimate, not a bound).
    The ``r_partial_sum`` column interpolates the increments between grid
    points (log-log) and adds them up over every integer ``n``.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates for slope fits")
    n0s = tuple(sorted({int(v) for v in np.atleast_1d(n0)}))
    if n0s[0] < 1 or n0s[-1] > horizon:
        raise ValueError("need 1 <= n0 <= horizon")
    bad = validate_schedule(w, horizon + 1)
    if bad is not None:
        raise ValueError(f"weight schedule is not positive and non-increasing at index {bad}")
    p = w.p
    c = w(horizon + 1)
    cp = c**p
    grid = geometric_grid(max(2, n0s[0]), horizon) if grid is None else np.asarray(grid, int)
    if len(grid) < 2:
        raise ValueError("grid needs at least two points")

    innov = dist.sample(as_rng(seed), replicates, horizon)
    diag = dist.diagonal(innov, horizon)
    cum = np.cumsum(diag, axis=1)
    needed = sorted(set(grid) | {n - 1 for n in grid if n > 1} | set(n0s))
    M = {n: dist.row(innov, n).sum(axis=1) for n in needed}

    def mean(x):
        return fsum_mean_columns(np.atleast_2d(x).T if np.ndim(x) == 1 else x)

    term_a = {}
    for a in n0s:
        vals = np.full(len(grid), np.nan)
        for j, n in enumerate(grid):
            if n >= a:
                S = M[a] + cum[:, n - 1] - cum[:, a - 1]
                vals[j] = cp[n - 1] * mean(np.abs(S) ** p)[0]
        term_a[a] = vals

    term_b = np.empty(len(grid))
    tail = np.empty(len(grid))
    for j, n in enumerate(grid):
        ks = np.arange(n, horizon + 1)
        S = M[n][:, None] + cum[:, n - 1:horizon] - cum[:, n - 1:n]
        ES = mean(np.abs(S) ** p)
        summand = (cp[n - 1:horizon] - cp[n:horizon + 1]) * ES
        term_b[j] = math.fsum(summand)
        last = ks >= max(n, horizon // 10)
        tail[j] = _power_tail(ks[last].astype(float), summand[last])

    rinc = np.empty(len(grid))
    for j, n in enumerate(grid):
        if dist.nested:
            rinc[j] = 0.0
            continue
        R = M[n] - diag[:, n - 1] - M[n - 1]
        rinc[j] = c[n - 1] * mean(np.abs(R) ** p)[0] ** (1.0 / p)
    rsum = _interp_partial_sums(grid, rinc, grid)

    slopes = {f"term_a[n0={a}]": loglog_slope(grid, term_a[a]) for a in n0s}
    # the truncated sums bend down near the horizon; fit on sum + extrapolated tail,
    # and only where the tail fit has at least three quarters of the range to work with
    full_b = np.where(np.isfinite(tail), term_b + tail, term_b)
    fit = grid <= horizon // 4
    if fit.sum() < 2:
        fit = np.ones(len(grid), dtype=bool)
    slopes["term_b"] = loglog_slope(grid[fit], full_b[fit])
    slopes["r_increment"] = loglog_slope(grid, rinc)

    def decays(vals, slope):
        v = vals[np.isfinite(vals)]
        return bool(np.all(v >= 0) and (np.all(v == 0) or slope < 0))

    verdicts = {f"term_a_to_zero[n0={a}]": decays(term_a[a], slopes[f"term_a[n0={a}]"])
                for a in n0s}
    verdicts["term_b_to_zero"] = decays(term_b, slopes["term_b"])
    verdicts["r_summable"] = bool(np.all(rinc == 0) or slopes["r_increment"] < -1)
    return SllnReport(grid=grid, n0s=n0s, p=p, term_a=term_a, term_b=term_b, term_b_tail=tail,
                      r_increment=rinc, r_partial_sum=rsum, slopes=slopes, verdicts=verdicts)


@dataclass
class DiagonalPaths:
    seeds: list
    trajectories: np.ndarray
    running_sup: np.ndarray

    def at(self, n):
        """Running-sup values of every seed at index ``n`` (1-based)."""
        return self.running_sup[:, n - 1]


def diagonal_paths(dist, w, seeds, horizon):
    """Per-seed ``c_n M[n, n]`` and ``sup_{n <= m <= horizon} c_m |M[m, m]|``."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    c = w(horizon)
    traj = np.empty((len(seeds), horizon))
    for k, s in enumerate(seeds):
        innov = dist.sample(np.random.default_rng(s), 1, horizon)
        traj[k] = c * dist.row_sums(innov, horizon)[0]
    sup = np.maximum.accumulate(np.abs(traj)[:, ::-1], axis=1)[:, ::-1]
    return DiagonalPaths(seeds=list(seeds), trajectories=traj, running_sup=sup)
