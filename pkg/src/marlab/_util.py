"""Small numeric helpers shared across modules."""

import math

import numpy as np


def fsum_mean(x, weights=None):
    """Compensated (order-insensitive) mean of a 1-D sample.

    With ``weights`` the result is ``sum(weights * x)``; the weights are
    assumed to already sum to one (enumeration probabilities).
    """
    x = np.asarray(x, dtype=float).ravel()
    if weights is None:
        if x.size == 0:
            raise ValueError("empty sample")
        return math.fsum(x.tolist()) / x.size
    return math.fsum((np.asarray(weights, dtype=float).ravel() * x).tolist())


def fsum_mean_columns(X, weights=None):
    """Column-wise :func:`fsum_mean` of a 2-D array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.array([fsum_mean(X[:, j], weights) for j in range(X.shape[1])])


def loglog_slope(n, y):
    """Least-squares slope of ``log y`` against ``log n``.

    Non-positive entries of ``y`` are dropped; ``nan`` if fewer than two
    points remain.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(n[keep]), np.log(y[keep]), 1)
    return float(slope)


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
