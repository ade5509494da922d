"""Nadaraya-Watson regression on Markov-chain data.

The estimator of interest is the kernel-weighted average

    r_hat_psi(x0) = 1 / (n h_n) * sum_{i=1..n} psi(Y_i) K((x0 - X_i) / h_n)

whose almost-sure limit is ``pi(x0) * E[psi(Y) | X = x0]``.  With
``psi = 1`` it is a kernel density estimate of the stationary density;
the ratio of the ``psi(y) = y`` and ``psi = 1`` versions is the classical
Nadaraya-Watson estimate of ``r(x0)``.

Conditional expectations under the Gaussian AR(1) testbed are computed
in closed form where possible and by fixed Gauss quadrature otherwise.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from ._util import as_rng, loglog_slope
from .arrays import ArrayDistribution
from .markov_engine import (AR1Model, DriftSpec, FiniteJointChain, Path, drift_margin,
                            poisson_solve_finite, simulate_many)

_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(40)
_GH_W = _GH_W / _GH_W.sum()
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


class PreconditionError(ValueError):
    """An experiment's assumptions (kernel, bandwidth, drift, moments) are not met."""


# ---------------------------------------------------------------------------
# Kernels and bandwidths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """A smoothing kernel with its sup, Lipschitz constant and support radius."""

    name: str
    K: Callable
    sup_K: float
    lipschitz_K: float
    radius: float = math.inf

    def __call__(self, u):
        return self.K(u)

    def integral(self):
        if math.isinf(self.radius):
            val, _ = integrate.quad(self.K, -np.inf, np.inf, epsabs=1e-12)
        else:
            val, _ = integrate.quad(self.K, -self.radius, self.radius, epsabs=1e-12, limit=200)
        return val


def gaussian_kernel():
    return KernelSpec("gaussian", lambda u: np.exp(-0.5 * np.square(u)) / math.sqrt(2 * math.pi),
                      sup_K=1 / math.sqrt(2 * math.pi),
                      lipschitz_K=math.exp(-0.5) / math.sqrt(2 * math.pi))


def epanechnikov_kernel():
    return KernelSpec("epanechnikov", lambda u: 0.75 * np.clip(1 - np.square(u), 0, None),
                      sup_K=0.75, lipschitz_K=1.5, radius=1.0)


def uniform_kernel():
    """Indicator of ``[-1/2, 1/2]``; bounded but not Lipschitz."""
    return KernelSpec("uniform", lambda u: (np.abs(u) <= 0.5).astype(float),
                      sup_K=1.0, lipschitz_K=math.inf, radius=0.5)


KERNELS = {"gaussian": gaussian_kernel, "epanechnikov": epanechnikov_kernel,
           "uniform": uniform_kernel}


@dataclass(frozen=True)
class BandwidthSchedule:
    """``h_n = n ** (-beta)`` with ``0 < beta < 1/4``."""

    beta: float = 0.2

    def __post_init__(self):
        if not 0 < self.beta < 0.25:
            raise ValueError(f"beta must lie in the open interval (0, 1/4), got {self.beta}")

    def __call__(self, n):
        return np.asarray(n, dtype=float) ** (-self.beta)


@dataclass
class KernelVerdict:
    bounded: bool
    tail: bool
    lipschitz: bool
    sup: float
    tail_witness: float
    lipschitz_witness: float

    @property
    def ok(self):
        return self.bounded and self.tail and self.lipschitz


def check_kernel(spec, grid=None):
    """Grid evidence for boundedness, ``|x| K(x) -> 0`` and a Lipschitz bound.

    The Lipschitz witness is the largest difference quotient on the grid;
    a jump shows up as a quotient that doubles when the spacing halves.
    """
    grid = np.linspace(-30, 30, 200_001) if grid is None else np.asarray(grid, dtype=float)
    k = spec.K(grid)
    sup = float(np.max(k))
    bounded = bool(np.all(np.isfinite(k)) and np.all(k >= 0))
    far = np.abs(grid) >= 0.9 * np.max(np.abs(grid))
    tail_witness = float(np.max(np.abs(grid[far]) * k[far]))
    tail = tail_witness < 1e-6

    def max_slope(g):
        kk = spec.K(g)
        return float(np.max(np.abs(np.diff(kk)) / np.diff(g)))

    coarse = max_slope(grid[::2])
    fine = max_slope(grid)
    lipschitz = bool(np.isfinite(fine) and fine < 1.5 * coarse + 1e-12)
    return KernelVerdict(bounded=bounded, tail=bool(tail), lipschitz=lipschitz, sup=sup,
                         tail_witness=tail_witness, lipschitz_witness=fine)


# ---------------------------------------------------------------------------
# Response transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Psi:
    """Transform ``psi`` applied to responses; ``name`` selects closed forms."""

    name: str
    func: Callable

    def __call__(self, y):
        return self.func(y)


PSI = {
    "one": Psi("one", lambda y: np.ones_like(np.asarray(y, dtype=float))),
    "identity": Psi("identity", lambda y: np.asarray(y, dtype=float)),
    "square": Psi("square", lambda y: np.square(y)),
    "zero": Psi("zero", lambda y: np.zeros_like(np.asarray(y, dtype=float))),
}


def as_psi(psi):
    if isinstance(psi, Psi):
        return psi
    if isinstance(psi, str):
        return PSI[psi]
    return Psi("custom", psi)


def _gauss_legendre_moment(u, mean, sd, L):
    # E u(mean + sd Z) restricted to |Z| <= L
    z = L * _GL_X
    w = L * _GL_W * stats.norm.pdf(z)
    vals = u(mean[..., None] + sd[..., None] * z)
    with np.errstate(invalid="ignore", over="ignore"):
        return np.sum(vals * w, axis=-1)


def gaussian_moment(u, mean, sd):
    """``E u(mean + sd Z)``; ``inf`` when the truncated integrals fail to settle."""
    mean = np.asarray(mean, dtype=float)
    sd = np.broadcast_to(np.asarray(sd, dtype=float), mean.shape)
    with np.errstate(over="ignore"):
        a = _gauss_legendre_moment(u, mean, sd, 10.0)
        b = _gauss_legendre_moment(u, mean, sd, 20.0)
    ok = np.isfinite(a) & np.isfinite(b) & (np.abs(a - b) <= 1e-6 * (1 + np.abs(b)))
    return np.where(ok, b, np.inf)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionProblem:
    """Estimation of ``pi(x0) E[psi(Y) | X = x0]`` from an :class:`AR1Model` path."""

    model: AR1Model = field(default_factory=AR1Model)
    psi: Psi = field(default_factory=lambda: PSI["one"])
    x0: float = 0.0
    kernel: KernelSpec = field(default_factory=gaussian_kernel)
    bandwidth: BandwidthSchedule = field(default_factory=BandwidthSchedule)

    def __post_init__(self):
        object.__setattr__(self, "psi", as_psi(self.psi))

    @property
    def r(self):
        return self.model.r

    # -- conditional moments of psi(Y) given X = x --------------------------

    def cond_mean(self, x):
        x = np.asarray(x, dtype=float)
        name = self.psi.name
        if name == "one":
            return np.ones_like(x)
        if name == "zero":
            return np.zeros_like(x)
        if name == "identity":
            return np.asarray(self.r(x), dtype=float)
        if name == "square":
            return np.square(self.r(x)) + np.square(self.model.tau_at(x))
        return gaussian_moment(self.psi, self.r(x), self.model.tau_at(x))

    def cond_abs(self, x):
        x = np.asarray(x, dtype=float)
        name = self.psi.name
        if name in ("one", "zero", "square"):
            return np.abs(self.cond_mean(x))
        if name == "identity":
            m = np.asarray(self.r(x), dtype=float)
            t = self.model.tau_at(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                folded = (t * math.sqrt(2 / math.pi) * np.exp(-0.5 * (m / t) ** 2)
                          + m * (1 - 2 * stats.norm.cdf(-m / t)))
            return np.where(t > 0, folded, np.abs(m))
        return gaussian_moment(lambda y: np.abs(self.psi(y)), self.r(x), self.model.tau_at(x))

    def cond_square(self, x):
        x = np.asarray(x, dtype=float)
        name = self.psi.name
        if name in ("one", "zero"):
            return np.square(self.cond_mean(x))
        if name == "identity":
            return np.square(self.r(x)) + np.square(self.model.tau_at(x))
        return gaussian_moment(lambda y: np.square(self.psi(y)), self.r(x),
                               self.model.tau_at(x))

    def target(self):
        """The almost-sure limit ``pi(x0) E[psi(Y) | X = x0]``."""
        return float(self.model.stationary_density(self.x0) * self.cond_mean(self.x0))

    def F(self, x, y, h):
        """``psi(y) K((x0 - x) / h)``."""
        return self.psi(y) * self.kernel.K((self.x0 - np.asarray(x)) / h)

    def one_step(self, x, h):
        """``E[psi(Y_1) K((x0 - X_1) / h) | X_0 = x]``; ``h`` broadcasts against ``x``."""
        m = self.model
        if m.sigma == 0:
            raise PreconditionError("degenerate transition kernel (sigma = 0)")
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        mean = m.phi * x
        if self.kernel.name == "gaussian":
            # K((x0 - z)/h) = h N(z; x0, h^2); multiply the two Gaussians in z
            v = m.sigma**2 + h**2
            scale = h * np.exp(-0.5 * (self.x0 - mean) ** 2 / v) / np.sqrt(2 * math.pi * v)
            if self.psi.name == "one":
                return scale
            mu = (mean * h**2 + self.x0 * m.sigma**2) / v
            s = m.sigma * h / np.sqrt(v)
            z = mu[..., None] + np.asarray(s)[..., None] * _GH_X
            return scale * np.sum(self.cond_mean(z) * _GH_W, axis=-1)
        R = self.kernel.radius
        if math.isinf(R):
            R = 12.0
        u = R * _GL_X
        w = R * _GL_W * self.kernel.K(u)
        z = self.x0 - np.asarray(h)[..., None] * u
        dens = stats.norm.pdf(z, mean[..., None], m.sigma)
        return np.asarray(h) * np.sum(w * dens * self.cond_mean(z), axis=-1)


@dataclass(frozen=True)
class FiniteRegressionProblem:
    """Finite-state analogue of :class:`RegressionProblem` with exact conditional expectations."""

    joint: FiniteJointChain
    psi: Psi = field(default_factory=lambda: PSI["one"])
    x0: float = 0.0
    kernel: KernelSpec = field(default_factory=gaussian_kernel)
    bandwidth: BandwidthSchedule = field(default_factory=BandwidthSchedule)

    def __post_init__(self):
        object.__setattr__(self, "psi", as_psi(self.psi))

    def weights(self, h):
        return self.kernel.K((self.x0 - self.joint.chain.states) / h)

    def simulate(self, n, seed, x0_state=0):
        s, a = self.joint.simulate(n, seed, x0_state)
        X = self.joint.chain.states[s]
        eps = self.joint.errors[a]
        return Path(X=X, eps=eps, Y=self.joint.r_values[s] + eps, states=s)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


@dataclass
class NWResult:
    r_hat: np.ndarray
    r_hat_psi: np.ndarray
    defined: np.ndarray


def nw_estimates(X, Y, x0, h, kernel, psi):
    """Both estimators from raw samples (last axis indexes observations)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] == 0:
        raise ValueError("empty sample")
    k = kernel.K((x0 - X) / h)
    den = k.sum(axis=-1)
    n = X.shape[-1]
    r_hat_psi = (as_psi(psi)(Y) * k).sum(axis=-1) / (n * h)
    defined = den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        r_hat = np.where(defined, (Y * k).sum(axis=-1) / np.where(defined, den, 1.0), np.nan)
    return NWResult(r_hat=r_hat, r_hat_psi=r_hat_psi, defined=defined)


def nw(path, problem, n):
    """Estimators from observations ``1..n`` of ``path``.

    The ratio is ``nan`` (and ``defined`` is False) when every kernel
    weight vanishes.
    """
    if n < 1 or path.X.shape[-1] < n + 1:
        raise ValueError(f"path has {path.X.shape[-1] - 1} observations, {n} requested")
    h = float(problem.bandwidth(n))
    return nw_estimates(path.X[..., 1:n + 1], path.Y[..., 1:n + 1], problem.x0, h,
                        problem.kernel, problem.psi)


def bias_term(problem, n, density=None):
    """``(1/h) int K((x0 - x)/h) E[psi(Y)|X=x] pi(x) dx`` and its quadrature error.

    ``density`` overrides the closed-form stationary density of the model.
    """
    h = float(problem.bandwidth(n))
    pi = problem.model.stationary_density if density is None else density
    x0 = problem.x0

    def integrand(u):
        x = x0 - h * u
        return float(problem.kernel.K(u) * problem.cond_mean(x) * pi(x))

    R = problem.kernel.radius
    lo, hi = (-np.inf, np.inf) if math.isinf(R) else (-R, R)
    val, err = integrate.quad(integrand, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
    return val, err


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class PsiVerdict:
    sup1: float
    sup2: float
    argmax1: float
    argmax2: float
    growing: bool

    @property
    def ok(self):
        return math.isfinite(self.sup1) and math.isfinite(self.sup2) and not self.growing


def check_psi(problem, V, grid=None):
    """Grid sups of ``V^{-1/2}(1+|x|) E|psi(Y)|`` and ``V^{-1} E[psi(Y)^2]``.

    ``growing`` flags a sup attained at the grid edge while still increasing
    outward, i.e. evidence that the supremum over the real line is infinite.
    """
    grid = np.linspace(-30, 30, 10_000) if grid is None else np.asarray(grid, dtype=float)
    v = np.asarray(V(grid), dtype=float)
    a1 = (1 + np.abs(grid)) * problem.cond_abs(grid) / np.sqrt(v)
    a2 = problem.cond_square(grid) / v
    growing = False
    for a in (a1, a2):
        if not np.all(np.isfinite(a)):
            continue
        k = int(np.argmax(a))
        if k in (0, len(grid) - 1) and a[k] > a[k + (1 if k == 0 else -1)] * (1 + 1e-9):
            growing = True
    i1 = int(np.nanargmax(np.where(np.isfinite(a1), a1, np.inf)))
    i2 = int(np.nanargmax(np.where(np.isfinite(a2), a2, np.inf)))
    return PsiVerdict(sup1=float(np.max(a1)), sup2=float(np.max(a2)), argmax1=float(grid[i1]),
                      argmax2=float(grid[i2]), growing=growing)


def default_drift_spec(model):
    """Drift spec for ``V = 1 + x^2`` under an AR(1) model.

    ``PV(x) = 1 + sigma^2 + phi^2 x^2``; with ``lambda_d = (1 + phi^2)/2``
    the inequality needs the offset ``b = 1 + sigma^2 - lambda_d`` only on
    ``|x| <= sqrt(b / (lambda_d - phi^2))``.
    """
    from .markov_engine import quadratic_V

    lam = (1 + model.phi**2) / 2
    b = 1 + model.sigma**2 - lam
    xc = math.sqrt(max(b, 0.0) / (lam - model.phi**2))
    return DriftSpec(V=quadratic_V(), lambda_d=lam, b=max(b, 0.0), small_set=(-xc, xc))


def check_preconditions(problem, drift=None, grid=None):
    """Raise :class:`PreconditionError` unless kernel, chain, drift and moment checks pass."""
    kv = check_kernel(problem.kernel)
    if not kv.ok:
        raise PreconditionError(f"kernel {problem.kernel.name!r} fails regularity checks: {kv}")
    try:
        problem.model.validate()
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc
    drift = default_drift_spec(problem.model) if drift is None else drift
    grid = np.linspace(-10, 10, 2001) if grid is None else grid
    dr = drift_margin(problem.model, drift, grid)
    if not dr.holds:
        raise PreconditionError(f"drift condition fails at x={dr.argmin} (margin {dr.margin})")
    pv = check_psi(problem, drift.V)
    if not pv.ok:
        raise PreconditionError(f"moment conditions on psi fail: {pv}")
    return kv, dr, pv


# ---------------------------------------------------------------------------
# Decomposition and experiments
# ---------------------------------------------------------------------------


@dataclass
class DecompositionTerms:
    r_hat_psi: float
    bias: float
    martingale: float
    boundary: float
    mode: str

    @property
    def residual(self):
        return self.bias + self.martingale + self.boundary - self.r_hat_psi


def decomposition_terms(path, problem, n, mode=None):
    """Split ``r_hat_psi`` into bias, martingale and boundary parts.

    For a :class:`FiniteRegressionProblem` ("oracle" mode) every part is
    computed exactly from the Poisson solution and the three parts add up
    to ``r_hat_psi``.  For an AR(1) problem ("residual" mode) the boundary
    part uses the one-step conditional mean as a proxy and the martingale
    part is what remains.
    """
    oracle = isinstance(problem, FiniteRegressionProblem)
    mode = mode or ("oracle" if oracle else "residual")
    if mode == "oracle" and not oracle:
        raise ValueError("oracle mode needs a finite-state problem")
    h = float(problem.bandwidth(n))
    X = path.X[..., : n + 1]
    Y = path.Y[..., : n + 1]
    r_hat_psi = float(np.sum(problem.psi(Y[1:]) * problem.kernel.K((problem.x0 - X[1:]) / h))
                      / (n * h))
    if mode == "residual":
        bias, _ = bias_term(problem, n)
        G = problem.one_step(np.array([X[0], X[n]]), h)
        boundary = float(G[0] - G[1]) / (n * h)
        return DecompositionTerms(r_hat_psi, bias, r_hat_psi - bias - boundary, boundary, mode)

    joint = problem.joint
    chain = joint.chain
    s = path.states[: n + 1]
    w = problem.weights(h)
    f = w * joint.conditional_mean(problem.psi)
    g = poisson_solve_finite(chain, f).g
    Pg = chain.P @ g
    EH = chain.P @ f + chain.P @ Pg
    H = problem.psi(Y) * w[s] + Pg[s]
    D = H[1:] - EH[s[:-1]]
    bias = float(chain.pi @ f) / h
    martingale = float(D.sum()) / (n * h)
    boundary = float(EH[s[0]] - EH[s[n]]) / (n * h)
    return DecompositionTerms(r_hat_psi, bias, martingale, boundary, mode)


@dataclass
class ConsistencyReport:
    n_grid: np.ndarray
    seeds: list
    target: float
    r_hat_psi: np.ndarray
    r_hat: np.ndarray
    bias: np.ndarray
    boundary: np.ndarray
    errors: np.ndarray
    medians: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    passed: bool

    def rows(self):
        """``(n, seed, r_hat_psi, r_hat, bias, boundary, error)`` records."""
        out = []
        for j, n in enumerate(self.n_grid):
            for k, seed in enumerate(self.seeds):
                out.append((int(n), seed, self.r_hat_psi[k, j], self.r_hat[k, j], self.bias[j],
                            self.boundary[k, j], self.errors[k, j]))
        return out


def consistency_experiment(problem, n_grid, seeds, drift=None, check=True):
    """Error curves ``|r_hat_psi(n) - target|`` across seeds.

    Passes when the median error is non-increasing along ``n_grid``.
    """
    if check:
        check_preconditions(problem, drift)
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    path = simulate_many(problem.model, int(n_grid[-1]), seeds)
    target = problem.target()
    S, J = len(seeds), len(n_grid)
    rpsi = np.empty((S, J))
    rhat = np.empty((S, J))
    bias = np.empty(J)
    bnd = np.empty((S, J))
    for j, n in enumerate(n_grid):
        res = nw(path, problem, int(n))
        rpsi[:, j] = res.r_hat_psi
        rhat[:, j] = res.r_hat
        bias[j] = bias_term(problem, int(n))[0]
        h = float(problem.bandwidth(n))
        G0 = problem.one_step(path.X[:, 0], h)
        Gn = problem.one_step(path.X[:, n], h)
        bnd[:, j] = (G0 - Gn) / (n * h)
    err = np.abs(rpsi - target)
    med = np.median(err, axis=0)
    return ConsistencyReport(n_grid=n_grid, seeds=list(seeds), target=target, r_hat_psi=rpsi,
                             r_hat=rhat, bias=bias, boundary=bnd, errors=err, medians=med,
                             q05=np.quantile(err, 0.05, axis=0),
                             q95=np.quantile(err, 0.95, axis=0),
                             passed=bool(np.all(np.diff(med) <= 0)))


# ---------------------------------------------------------------------------
# The regression martingale-difference array
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChainKernelArray(ArrayDistribution):
    """Array built from kernel-weighted observations of one chain path.

    Row ``n`` uses bandwidth ``h_n``:

        D[n, k] = psi(Y_k) K((x0 - X_k)/h_n) - E[psi(Y_k) K((x0 - X_k)/h_n) | X_{k-1}]

    Every row is a function of the same path, so all rows share the
    filtration generated by ``(X_k, eps_k)``.
    """

    problem: RegressionProblem = field(default_factory=RegressionProblem)
    scale: float = 1.0

    def sample(self, rng, size, N):
        rng = as_rng(rng)
        seeds = rng.integers(0, 2**63, size=size)
        return simulate_many(self.problem.model, N, [int(s) for s in seeds])

    def batch_size(self, innov):
        return innov.X.shape[0]

    def row(self, innov, n):
        if n > innov.X.shape[1] - 1:
            raise IndexError(f"row {n} needs a path of length {n}")
        h = float(self.problem.bandwidth(n))
        F = self.problem.F(innov.X[:, 1:n + 1], innov.Y[:, 1:n + 1], h)
        G = self.problem.one_step(innov.X[:, :n], h)
        return self.scale * (F - G)

    def diagonal(self, innov, N):
        h = self.problem.bandwidth(np.arange(1, N + 1))
        F = self.problem.F(innov.X[:, 1:N + 1], innov.Y[:, 1:N + 1], h)
        G = self.problem.one_step(innov.X[:, :N], h)
        return self.scale * (F - G)
