"""Martingale-difference triangular arrays and their derived sums.

An array ``{D[n, i], 1 <= i <= n}`` is never stored as a whole.  A
distribution object knows how to draw (or enumerate) one shared
innovation stream and how to turn a prefix of that stream into any row.
Because every row is a function of the same stream, all rows share one
filtration: ``F[n, i] = F[i]`` holds by construction and conditional
expectations reduce to averages over the next innovation.

Typical use::

    >>> from marlab.arrays import rademacher_nested, generate, partial_sums
    >>> arr = generate(rademacher_nested(), seed=1, N=5)
    >>> partial_sums(arr, 5).shape
    (5,)
"""

from dataclasses import dataclass, field, replace
import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np

from ._util import as_rng

#: Largest number of paths exact enumeration will build.
ENUMERATION_LIMIT = 2**24


class EnumerationOverflow(ValueError):
    """Raised when exact enumeration would exceed :data:`ENUMERATION_LIMIT` paths."""


# ---------------------------------------------------------------------------
# Weight schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSchedule:
    """Non-increasing positive weights ``c_1, c_2, ...`` and a moment order.

    Either a power law ``c_n = n ** (-exponent)`` or an explicit finite
    list of values.  ``p`` is the moment order (``p >= 1``) and ``q`` its
    conjugate exponent (``inf`` when ``p == 1``).

    If ``horizon`` is given the schedule is validated up to it on
    construction.
    """

    p: float = 2.0
    exponent: Optional[float] = None
    values: Optional[tuple] = None
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"moment order p must be >= 1, got {self.p}")
        if (self.exponent is None) == (self.values is None):
            raise ValueError("give exactly one of exponent= or values=")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.horizon is not None:
            bad = validate_schedule(self, self.horizon)
            if bad is not None:
                raise ValueError(f"schedule is not positive and non-increasing at index {bad}")

    @classmethod
    def power(cls, exponent, p=2.0, horizon=None):
        return cls(p=p, exponent=float(exponent), horizon=horizon)

    @classmethod
    def explicit(cls, values, p=2.0, horizon=None):
        return cls(p=p, values=tuple(values), horizon=horizon)

    @property
    def q(self):
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)

    def __call__(self, N):
        """Return ``c_1, ..., c_N`` as an array."""
        if self.values is not None:
            if N > len(self.values):
                raise ValueError(f"explicit schedule has {len(self.values)} values, {N} requested")
            return np.array(self.values[:N])
        n = np.arange(1, N + 1, dtype=float)
        return n ** (-self.exponent)


def validate_schedule(w, N):
    """Check positivity and monotonicity of ``w`` up to ``N``.

    Returns ``None`` when ``c_1 >= c_2 >= ... >= c_N > 0``, otherwise the
    first (1-based) index where the schedule fails.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    c = w(N)
    for i in range(N):
        if not c[i] > 0 or (i > 0 and c[i] > c[i - 1]):
            return i + 1
    return None


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


class ArrayDistribution:
    """Base class for array generators.

    Subclasses implement :meth:`sample` and :meth:`row`.  ``innov`` is an
    opaque batch of innovation streams whose leading axis indexes
    replicates; :meth:`row` returns a ``(batch, n)`` array.
    """

    nested = False
    finite = False
    scale = 1.0

    def sample(self, rng, size, N):
        raise NotImplementedError

    def enumerate(self, N):
        raise EnumerationOverflow(f"{type(self).__name__} has no finite innovation alphabet")

    def row(self, innov, n):
        raise NotImplementedError

    def batch_size(self, innov):
        return np.shape(innov)[0]

    def row_sums(self, innov, N):
        """``M[m, m]`` for ``m = 1..N`` as a ``(batch, N)`` array."""
        out = np.empty((self.batch_size(innov), N))
        for m in range(1, N + 1):
            out[:, m - 1] = self.row(innov, m).sum(axis=1)
        return out

    def diagonal(self, innov, N):
        """``D[m, m]`` for ``m = 1..N`` as a ``(batch, N)`` array."""
        out = np.empty((self.batch_size(innov), N))
        for m in range(1, N + 1):
            out[:, m - 1] = self.row(innov, m)[:, m - 1]
        return out

    def scaled(self, s):
        """Same distribution with every entry multiplied by ``s``."""
        return replace(self, scale=self.scale * s)


@dataclass(frozen=True, eq=False)
class PredictableArray(ArrayDistribution):
    """Array ``D[n, i] = scale * xi_i * w(n, xi_1..xi_{i-1})`` on a finite alphabet.

    ``xi`` are i.i.d. draws from ``values`` with probabilities ``probs``
    (mean zero).  ``weight(n, xi)`` receives the ``(batch, n)`` prefix and
    must return a ``(batch, n)`` array whose column ``i`` depends on
    columns ``< i`` only; that makes every entry a martingale difference.
    With ``weight=None`` the array is the nested random walk.
    """

    values: tuple = (-1.0, 1.0)
    probs: tuple = (0.5, 0.5)
    weight: Optional[Callable] = None
    nested: bool = True
    scale: float = 1.0
    name: str = "predictable"
    finite = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        pr = np.asarray(self.probs, dtype=float)
        if v.shape != pr.shape or v.ndim != 1:
            raise ValueError("values and probs must be 1-D of equal length")
        if np.any(pr <= 0) or abs(pr.sum() - 1) > 1e-12:
            raise ValueError("probs must be positive and sum to 1")
        if abs(float(v @ pr)) > 1e-12:
            raise ValueError("innovation alphabet must have mean zero")

    def sample(self, rng, size, N):
        rng = as_rng(rng)
        idx = rng.choice(len(self.values), size=(size, N), p=self.probs)
        return np.asarray(self.values, dtype=float)[idx]

    def enumerate(self, N):
        """All ``len(values) ** N`` streams and their probabilities."""
        k = len(self.values)
        if k**N > ENUMERATION_LIMIT:
            raise EnumerationOverflow(f"{k}**{N} paths exceed the enumeration limit 2**24")
        digits = np.array(list(itertools.product(range(k), repeat=N)), dtype=np.intp)
        digits = digits.reshape(k**N, N)
        probs = np.prod(np.asarray(self.probs)[digits], axis=1)
        return np.asarray(self.values, dtype=float)[digits], probs

    def row(self, innov, n):
        if n > innov.shape[1]:
            raise IndexError(f"row {n} needs {n} innovations, stream has {innov.shape[1]}")
        xi = innov[:, :n]
        if self.weight is None:
            return self.scale * xi
        return self.scale * xi * self.weight(n, xi)

    def row_sums(self, innov, N):
        if self.weight is None:
            return self.scale * np.cumsum(innov[:, :N], axis=1)
        return super().row_sums(innov, N)

    def diagonal(self, innov, N):
        if self.weight is None:
            return self.scale * innov[:, :N].copy()
        return super().diagonal(innov, N)


@dataclass(frozen=True, eq=False)
class NestedIID(ArrayDistribution):
    """Nested array of i.i.d. Gaussian increments, ``D[n, i] = sigma * Z_i``."""

    sigma: float = 1.0
    scale: float = 1.0
    nested = True

    def sample(self, rng, size, N):
        return as_rng(rng).standard_normal((size, N))

    def row(self, innov, n):
        if n > innov.shape[1]:
            raise IndexError(f"row {n} needs {n} innovations, stream has {innov.shape[1]}")
        return self.scale * self.sigma * innov[:, :n]

    def row_sums(self, innov, N):
        return self.scale * self.sigma * np.cumsum(innov[:, :N], axis=1)

    def diagonal(self, innov, N):
        return self.scale * self.sigma * innov[:, :N].copy()


@dataclass(frozen=True, eq=False)
class ExplicitArray(ArrayDistribution):
    """A fixed, user-supplied array (one realisation, no randomness)."""

    rows: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in r) for r in self.rows)
        for n, r in enumerate(rows, start=1):
            if len(r) != n:
                raise ValueError(f"row {n} has {len(r)} entries, expected {n}")
        object.__setattr__(self, "rows", rows)

    def sample(self, rng, size, N):
        if N > len(self.rows):
            raise IndexError(f"explicit array has {len(self.rows)} rows, {N} requested")
        return np.zeros((size, 0))

    def enumerate(self, N):
        if N > len(self.rows):
            raise IndexError(f"explicit array has {len(self.rows)} rows, {N} requested")
        return np.zeros((1, 0)), np.ones(1)

    def row(self, innov, n):
        if not 1 <= n <= len(self.rows):
            raise IndexError(f"row {n} out of range 1..{len(self.rows)}")
        r = self.scale * np.asarray(self.rows[n - 1])
        return np.broadcast_to(r, (self.batch_size(innov), n))


def rademacher_nested():
    """Simple symmetric random walk, ``D[n, i] = xi_i`` with ``xi = +-1``."""
    return PredictableArray(name="rademacher_nested")


def skewed_nested():
    """Nested walk with asymmetric steps ``-2`` (prob 1/3) and ``+1`` (prob 2/3)."""
    return PredictableArray(values=(-2.0, 1.0), probs=(1 / 3, 2 / 3), name="skewed_nested")


def _lagged(xi):
    lag = np.zeros_like(xi)
    lag[:, 1:] = xi[:, :-1]
    return lag


def tilted_array(gamma=0.5, a=0.5, values=(-1.0, 1.0), probs=(0.5, 0.5)):
    """Non-nested array with weights ``(i/n)**gamma * (1 + a * xi_{i-1})``.

    Rows drift with ``n`` so the row increment ``R_n`` is non-zero.
    """

    def weight(n, xi):
        i = np.arange(1, n + 1)
        return (i / n) ** gamma * (1.0 + a * _lagged(xi))

    return PredictableArray(values=values, probs=probs, weight=weight, nested=False,
                            name=f"tilted(gamma={gamma}, a={a})")


def alternating_array(a=0.5, values=(-1.0, 1.0), probs=(0.5, 0.5)):
    """Non-nested array whose predictable weight flips sign with the row parity."""

    def weight(n, xi):
        return 1.0 + a * (-1.0) ** n * _lagged(xi)

    return PredictableArray(values=values, probs=probs, weight=weight, nested=False,
                            name=f"alternating(a={a})")


def predictable_nested(a=0.5, values=(-1.0, 1.0), probs=(0.5, 0.5)):
    """Nested martingale transform ``xi_i * (1 + a * xi_{i-1})``."""

    def weight(n, xi):
        return 1.0 + a * _lagged(xi)

    return PredictableArray(values=values, probs=probs, weight=weight, nested=True,
                            name=f"predictable_nested(a={a})")


# ---------------------------------------------------------------------------
# Realised arrays
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriangularArray:
    """One realisation of an array, rows materialised on demand."""

    dist: ArrayDistribution
    innov: object
    N: int
    seed: Optional[int] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]):
        dist = ExplicitArray(rows=tuple(rows))
        return cls(dist=dist, innov=np.zeros((1, 0)), N=len(dist.rows))

    def row(self, n):
        """Row ``n`` as a 1-D array of length ``n``."""
        if not 1 <= n <= self.N:
            raise IndexError(f"row {n} out of range 1..{self.N}")
        if n not in self._cache:
            self._cache[n] = np.array(self.dist.row(self.innov, n)[0], dtype=float)
        return self._cache[n]


def generate(dist, seed, N):
    """Draw one array of horizon ``N``; deterministic in ``(dist, seed, N)``."""
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    innov = dist.sample(np.random.default_rng(seed), 1, N)
    return TriangularArray(dist=dist, innov=innov, N=N, seed=seed)


def load_array(path):
    """Read an explicit array from a whitespace-separated text file, one row per line."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(tok) for tok in line.split()])
    return TriangularArray.from_rows(rows)


def partial_sums(arr, n):
    """``M[n, k]`` for ``k = 1..n``."""
    return np.cumsum(arr.row(n))


def extended_sum(arr, n, k):
    """``S[n, k]``: row ``n`` summed to ``min(n, k)``, then diagonal entries ``n+1..k``."""
    if k < 1 or n < 1:
        raise IndexError("n and k must be >= 1")
    if k <= n:
        return float(partial_sums(arr, n)[k - 1])
    total = float(arr.row(n).sum())
    for j in range(n + 1, k + 1):
        total += arr.row(j)[j - 1]
    return total


def row_increment(arr, n):
    """``R_n = sum_{j < n} (D[n, j] - D[n-1, j])``, defined for ``n >= 2``."""
    if n < 2:
        raise ValueError("row increment is defined for n >= 2")
    return float(arr.row(n)[:-1].sum() - arr.row(n - 1).sum())
