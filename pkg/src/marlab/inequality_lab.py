"""Maximal inequalities for martingales and martingale arrays.

Three bounds are checked here, each either exactly (by enumerating every
innovation path of a finite-alphabet array) or by Monte Carlo:

* the Chow-Birnbaum-Marshall inequality for one martingale,
* its triangular-array extension, which adds a row-increment term,
* a Burkholder-type moment bound for ``E|M[n, k]|^p``.

In Monte Carlo mode the left and right sides are estimated from the same
replicates, and a verdict holds when ``lhs <= rhs + 3 * std_error`` where
the standard error is that of the per-replicate difference.
"""

from dataclasses import dataclass
from functools import lru_cache
import math
from typing import Optional, Sequence

import numpy as np

from ._util import as_rng, fsum_mean, fsum_mean_columns
from .arrays import validate_schedule

EXACT = "exact"
MONTE_CARLO = "mc"

# relative slack used to resolve floating-point ties against thresholds
_TIE = 1e-12


@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    mode: str
    holds: bool
    std_error: float = 0.0
    replicates: Optional[int] = None
    terms: tuple = ()
    lam: Optional[float] = None

    @property
    def margin(self):
        return self.rhs - self.lhs


class PathSample:
    """Row sums, diagonals and row prefixes of an array over a set of paths.

    ``probs`` are enumeration probabilities (exact mode) or ``1/B``
    (Monte Carlo).  Rows other than the diagonal are built on demand.
    """

    def __init__(self, dist, innov, probs, N, exact):
        self.dist = dist
        self.innov = innov
        self.probs = probs
        self.N = N
        self.exact = exact
        self.M = dist.row_sums(innov, N)
        self.diag = dist.diagonal(innov, N)
        self._rows = {}

    @property
    def size(self):
        return len(self.probs)

    def row(self, n):
        if n not in self._rows:
            self._rows[n] = np.asarray(self.dist.row(self.innov, n), dtype=float)
        return self._rows[n]

    def extended(self, n, N):
        """``S[n, j]`` for ``j = n..N`` as a ``(paths, N - n + 1)`` array."""
        tail = np.cumsum(self.diag[:, n:N], axis=1)
        base = self.M[:, n - 1:n]
        return np.concatenate([base, base + tail], axis=1)

    def increments(self):
        """``R_j`` for ``j = 1..N`` (``R_1 = 0``, and ``R = 0`` for nested arrays)."""
        R = np.zeros_like(self.M)
        if self.dist.nested:
            return R
        R[:, 1:] = self.M[:, 1:] - self.diag[:, 1:] - self.M[:, :-1]
        return R

    def mean(self, x):
        return fsum_mean(x, self.probs if self.exact else None)

    def means(self, X):
        return fsum_mean_columns(X, self.probs if self.exact else None)

    def exceedance(self, values, thresholds):
        """``P(values > t)`` for every ``t``, one compensated pass over the paths.

        Paths are grouped by value (sorted), each group's probability is
        summed once, and tail probabilities are sums of group totals.
        """
        values = np.asarray(values, dtype=float)
        order = np.argsort(values, kind="stable")
        v = values[order]
        pr = self.probs[order]
        levels, starts = np.unique(v, return_index=True)
        bounds = np.append(starts, len(v))
        mass = [math.fsum(pr[a:b].tolist()) for a, b in zip(bounds[:-1], bounds[1:])]
        out = []
        for t in np.atleast_1d(thresholds):
            k = int(np.searchsorted(levels, t, side="right"))
            out.append(math.fsum(mass[k:]))
        return np.array(out)


@lru_cache(maxsize=16)
def _enumerated(dist, N):
    innov, probs = dist.enumerate(N)
    return PathSample(dist, innov, probs, N, exact=True)


def path_sample(dist, N, mode=EXACT, replicates=10_000, seed=0):
    """Exact enumeration (cached) or ``replicates`` Monte Carlo paths of horizon ``N``."""
    if mode == EXACT:
        return _enumerated(dist, N)
    if mode != MONTE_CARLO:
        raise ValueError(f"unknown mode {mode!r}")
    innov = dist.sample(as_rng(seed), replicates, N)
    return PathSample(dist, innov, np.full(replicates, 1.0 / replicates), N, exact=False)


def _check_schedule(w, N):
    bad = validate_schedule(w, N)
    if bad is not None:
        raise ValueError(f"weight schedule is not positive and non-increasing at index {bad}")
    return w(N)


def _report(sample, lhs_i, rhs_i, terms, lam=None):
    """Combine per-path left/right contributions into a report."""
    lhs = sample.mean(lhs_i)
    rhs = sample.mean(rhs_i)
    if sample.exact:
        return InequalityReport(lhs=lhs, rhs=rhs, mode=EXACT, holds=bool(lhs <= rhs),
                                terms=terms, lam=lam)
    d = rhs_i - lhs_i
    se = float(np.std(d, ddof=1) / math.sqrt(sample.size)) if sample.size > 1 else 0.0
    return InequalityReport(lhs=lhs, rhs=rhs, mode=MONTE_CARLO, holds=bool(lhs <= rhs + 3 * se),
                            std_error=se, replicates=sample.size, terms=terms, lam=lam)


def cbm_bound(dist, w, n, N, mode=EXACT, row=None, replicates=10_000, seed=0):
    """Chow-Birnbaum-Marshall bound for the martingale ``S_m = M[row, m]``, ``m <= N``.

    ``lhs = P(max_{n<=m<=N} c_m |S_m| >= 1)`` and
    ``rhs = c_N^p E|S_N|^p + sum_{m=n}^{N-1} (c_m^p - c_{m+1}^p) E|S_m|^p``.
    ``row`` defaults to ``N``.
    """
    row = N if row is None else row
    if not 1 <= n <= N <= row:
        raise ValueError("need 1 <= n <= N <= row")
    p = w.p
    cp = _check_schedule(w, N) ** p
    sample = path_sample(dist, row, mode, replicates, seed)
    S = np.cumsum(sample.row(row)[:, :N], axis=1)
    absSp = np.abs(S) ** p
    c = w(N)
    hit = np.max(c[n - 1:N] * np.abs(S[:, n - 1:N]), axis=1) >= 1 - _TIE
    rhs_i = cp[N - 1] * absSp[:, N - 1] + absSp[:, n - 1:N - 1] @ (cp[n - 1:N - 1] - cp[n:N])
    return _report(sample, hit.astype(float), rhs_i, terms=())


def thm2_sweep(dist, w, n, N, lams, mode=EXACT, replicates=10_000, seed=0):
    """Array maximal inequality over a grid of thresholds.

    For each ``lam``::

        lhs = 2^-p lam^p P(max_{n<=m<=N} c_m |M[m, m]| > lam)
        rhs = c_N^p E|S[n, N]|^p + sum_{j=n}^{N-1} (c_j^p - c_{j+1}^p) E|S[n, j]|^p
              + E[(sum_{j=n+1}^N c_j |R_j|)^p]

    The three right-hand terms are returned in ``terms``.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise ValueError("threshold lambda must be > 0")
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    p = w.p
    c = _check_schedule(w, N)
    cp = c**p
    sample = path_sample(dist, N, mode, replicates, seed)
    absSp = np.abs(sample.extended(n, N)) ** p
    t1_i = cp[N - 1] * absSp[:, -1]
    t2_i = absSp[:, :-1] @ (cp[n - 1:N - 1] - cp[n:N])
    R = sample.increments()
    t3_i = (np.abs(R[:, n:N]) @ c[n:N]) ** p
    rhs_i = t1_i + t2_i + t3_i
    terms = (sample.mean(t1_i), sample.mean(t2_i), sample.mean(t3_i))
    peak = np.max(c[n - 1:N] * np.abs(sample.M[:, n - 1:N]), axis=1)
    if sample.exact:
        # the right side does not depend on lam; the left side only through P(peak > lam)
        rhs = math.fsum(terms)
        tail = sample.exceedance(peak, lams * (1 + _TIE))
        out = []
        for lam, prob in zip(lams, tail):
            lhs = 2.0**-p * lam**p * prob
            out.append(InequalityReport(lhs=lhs, rhs=rhs, mode=EXACT, holds=bool(lhs <= rhs),
                                        terms=terms, lam=float(lam)))
        return out
    out = []
    for lam in lams:
        exceed = (peak > lam * (1 + _TIE)).astype(float)
        out.append(_report(sample, 2.0**-p * lam**p * exceed, rhs_i, terms, lam=float(lam)))
    return out


def thm2_check(dist, w, n, N, lam, mode=EXACT, replicates=10_000, seed=0):
    """Single-threshold version of :func:`thm2_sweep`."""
    return thm2_sweep(dist, w, n, N, [lam], mode, replicates, seed)[0]


def burkholder_constant(p):
    """``(18 p q^{1/2})^p`` with ``1/p + 1/q = 1``, for ``p > 1``."""
    if not p > 1:
        raise ValueError("the moment bound needs p > 1")
    q = p / (p - 1.0)
    return (18.0 * p) ** p * q ** (p / 2.0)


def burkholder_check(dist, p, n, k, mode=EXACT, replicates=10_000, seed=0):
    """``E|M[n, k]|^p <= C k^{max(p/2, 1) - 1} sum_{j<=k} E|D[n, j]|^p``."""
    C = burkholder_constant(p)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    sample = path_sample(dist, n, mode, replicates, seed)
    D = sample.row(n)[:, :k]
    lhs_i = np.abs(D.sum(axis=1)) ** p
    rhs_i = C * k ** (max(p / 2.0, 1.0) - 1.0) * np.sum(np.abs(D) ** p, axis=1)
    return _report(sample, lhs_i, rhs_i, terms=(C,))
