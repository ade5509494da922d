"""Markov chains for the regression experiments and finite-state oracles.

Two kinds of objects live here:

* :class:`AR1Model`, a joint chain ``(X_i, eps_i)`` where ``X`` is a
  Gaussian AR(1) chain and ``eps_i | X_i = x ~ N(0, tau(x)**2)``.  The
  response is ``Y_i = r(X_i) + eps_i``.
* :class:`FiniteChain`, a row-stochastic matrix with its stationary law,
  used wherever exact answers are needed (ergodicity rates, Poisson
  equations).
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, linalg, signal, stats

from ._util import as_rng, fsum_mean


# ---------------------------------------------------------------------------
# Continuous-state joint chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AR1Model:
    """Gaussian AR(1) covariate chain with a Gaussian, state-dependent error kernel.

    ``X_n = phi * X_{n-1} + sigma * Z_n`` and, given ``X_n = x``,
    ``eps_n ~ N(0, tau(x)**2)``.  ``tau`` is a constant or a bounded
    callable.  The initial law is a point mass at ``x_init`` unless
    ``init_sd > 0``, in which case it is ``N(x_init, init_sd**2)``.
    ``init="stationary"`` starts from the invariant law.
    """

    phi: float = 0.5
    sigma: float = 1.0
    tau: Union[float, Callable] = 0.5
    r: Callable = np.sin
    x_init: float = 0.0
    init_sd: float = 0.0
    init: str = "given"

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ValueError(f"AR(1) coefficient must satisfy |phi| < 1, got {self.phi}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.init not in ("given", "stationary"):
            raise ValueError("init must be 'given' or 'stationary'")

    # -- laws ---------------------------------------------------------------

    @property
    def stationary_var(self):
        return self.sigma**2 / (1.0 - self.phi**2)

    def stationary_density(self, x):
        return stats.norm.pdf(x, 0.0, math.sqrt(self.stationary_var))

    def transition_density(self, x, z):
        return stats.norm.pdf(z, self.phi * np.asarray(x), self.sigma)

    def tau_at(self, x):
        if callable(self.tau):
            return np.asarray(self.tau(x), dtype=float)
        return np.full(np.shape(x), float(self.tau))

    def error_density(self, x, e):
        return stats.norm.pdf(e, 0.0, self.tau_at(x))

    def step(self, x, rng):
        """One X-transition from each entry of ``x``."""
        return self.phi * x + self.sigma * rng.standard_normal(np.shape(x))

    def init_moments(self):
        if self.init == "stationary":
            return 0.0, math.sqrt(self.stationary_var)
        return self.x_init, self.init_sd

    @property
    def irreducible(self):
        """Whether the X-kernel has a Lebesgue density (``sigma > 0``)."""
        return self.sigma > 0

    def validate(self, grid=None, tol=1e-6):
        """Quadrature checks: densities integrate to one, errors average to zero under pi."""
        if not self.irreducible:
            raise ValueError("degenerate transition kernel (sigma = 0): no density, "
                             "chain is not irreducible")
        grid = np.linspace(-5, 5, 11) if grid is None else grid
        for x in grid:
            mass, _ = integrate.quad(lambda z: self.transition_density(x, z),
                                     self.phi * x - 12 * self.sigma, self.phi * x + 12 * self.sigma,
                                     epsabs=1e-10)
            t = float(self.tau_at(x))
            emass = 1.0 if t == 0 else integrate.quad(lambda e: self.error_density(x, e),
                                                       -12 * t, 12 * t, epsabs=1e-10)[0]
            if abs(mass - 1) > tol or abs(emass - 1) > tol:
                raise ValueError(f"kernel density does not integrate to 1 at x={x}")
        mean_err = self.stationary_mean_error()
        if abs(mean_err) > tol:
            raise ValueError(f"stationary mean error is {mean_err}, expected 0")
        return mean_err

    def stationary_mean_error(self):
        """``int pi(x) E[eps | X = x] dx`` by nested quadrature."""
        s = math.sqrt(self.stationary_var)

        def cond_mean(x):
            t = float(self.tau_at(x))
            if t == 0:
                return 0.0
            return integrate.quad(lambda e: e * self.error_density(x, e), -12 * t, 12 * t,
                                  epsabs=1e-10)[0]

        val, _ = integrate.quad(lambda x: self.stationary_density(x) * cond_mean(x),
                                -12 * s, 12 * s, epsabs=1e-10)
        return val

    # -- operators ------------------------------------------------------------

    def PV(self, V, x):
        """``(P V)(x) = E[V(X_1) | X_0 = x]``.

        Closed form when ``V`` is a :class:`numpy.polynomial.Polynomial`,
        adaptive quadrature (``epsabs=1e-8``) otherwise.
        """
        x = np.asarray(x, dtype=float)
        if isinstance(V, Polynomial):
            return gaussian_poly_expectation(V, self.phi * x, self.sigma)
        if self.sigma == 0:
            return np.asarray(V(self.phi * x), dtype=float)
        out = np.empty(x.shape)
        for idx, xi in np.ndenumerate(x):
            m = self.phi * xi
            val, _ = integrate.quad(lambda z: V(m + self.sigma * z) * stats.norm.pdf(z),
                                    -np.inf, np.inf, epsabs=1e-8)
            out[idx] = val
        return out

    def mu_V(self, V):
        """``E V(X_0)`` under the initial law."""
        m, s = self.init_moments()
        if isinstance(V, Polynomial):
            return float(gaussian_poly_expectation(V, m, s))
        if s == 0:
            return float(V(m))
        val, _ = integrate.quad(lambda z: V(m + s * z) * stats.norm.pdf(z), -np.inf, np.inf,
                                epsabs=1e-8)
        return val


def gaussian_poly_expectation(V, mean, sd):
    """``E V(mean + sd * Z)`` for a polynomial ``V`` and standard normal ``Z``."""
    mean = np.asarray(mean, dtype=float)
    coef = V.convert().coef
    total = np.zeros_like(mean)
    # E (m + sZ)^k = sum_j C(k, j) m^(k-j) s^j E Z^j,  E Z^j = (j-1)!! for even j
    for k, a in enumerate(coef):
        if a == 0:
            continue
        term = np.zeros_like(mean)
        for j in range(0, k + 1, 2):
            dfact = math.prod(range(j - 1, 0, -2)) if j > 0 else 1
            term = term + math.comb(k, j) * mean ** (k - j) * sd**j * dfact
        total = total + a * term
    return total


@dataclass
class Path:
    """Simulated trajectory ``(X_i, eps_i, Y_i)`` for ``i = 0..n``.

    Arrays are 1-D for a single seed and 2-D ``(seeds, n + 1)`` for a batch.
    """

    X: np.ndarray
    eps: np.ndarray
    Y: np.ndarray
    states: Optional[np.ndarray] = None

    def __len__(self):
        return self.X.shape[-1]


def _draw(model, n, rngs):
    m0, s0 = model.init_moments()
    X0 = np.empty(len(rngs))
    Z = np.empty((len(rngs), n))
    E = np.empty((len(rngs), n + 1))
    for k, rng in enumerate(rngs):
        # fixed draw order per seed so a path never depends on its batch
        X0[k] = m0 + s0 * rng.standard_normal()
        Z[k] = rng.standard_normal(n)
        E[k] = rng.standard_normal(n + 1)
    return X0, Z, E


def simulate_many(model, n, seeds):
    """Simulate one path per seed; row ``k`` equals ``simulate(model, n, seeds[k])``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rngs = [as_rng(s) for s in seeds]
    X0, Z, E = _draw(model, n, rngs)
    X = np.empty((len(rngs), n + 1))
    X[:, 0] = X0
    if n > 0:
        X[:, 1:] = signal.lfilter([1.0], [1.0, -model.phi], model.sigma * Z, axis=1,
                                  zi=(model.phi * X0)[:, None])[0]
    eps = model.tau_at(X) * E
    return Path(X=X, eps=eps, Y=model.r(X) + eps)


def simulate(model, n, seed):
    """Simulate ``(X_i, eps_i, Y_i)`` for ``i = 0..n`` from one seed."""
    p = simulate_many(model, n, [seed])
    return Path(X=p.X[0], eps=p.eps[0], Y=p.Y[0])


# ---------------------------------------------------------------------------
# Drift condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftSpec:
    """Lyapunov function ``V >= 1``, rate ``lambda_d``, offset ``b`` and small set ``[lo, hi]``."""

    V: Callable
    lambda_d: float
    b: float
    small_set: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if not 0 < self.lambda_d < 1:
            raise ValueError("lambda_d must lie in (0, 1)")
        if self.b < 0:
            raise ValueError("b must be >= 0")

    def in_small_set(self, x):
        lo, hi = self.small_set
        return (np.asarray(x) >= lo) & (np.asarray(x) <= hi)

    def scaled(self, c):
        """Drift spec for ``c * V`` (margins scale by ``c``)."""
        V = self.V
        return DriftSpec(V=c * V if isinstance(V, Polynomial) else (lambda x: c * V(x)),
                         lambda_d=self.lambda_d, b=c * self.b, small_set=self.small_set)


def quadratic_V(c=1.0):
    """``V(x) = 1 + c x**2`` as a polynomial (enables closed-form ``PV``)."""
    return Polynomial([1.0, 0.0, c])


@dataclass
class DriftReport:
    margin: float
    argmin: float
    margins: np.ndarray
    holds: bool


def drift_margin(model, spec, grid):
    """Minimum over ``grid`` of ``lambda_d V(x) + b 1_C(x) - PV(x)``.

    A non-negative margin verifies the drift inequality on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    V = spec.V(grid)
    if np.any(V < 1):
        raise ValueError("Lyapunov function must satisfy V >= 1 on the grid")
    margins = spec.lambda_d * V + spec.b * spec.in_small_set(grid) - model.PV(spec.V, grid)
    k = int(np.argmin(margins))
    return DriftReport(margin=float(margins[k]), argmin=float(grid[k]), margins=margins,
                       holds=bool(margins[k] >= 0))


@dataclass
class MomentBoundReport:
    sup_estimate: float
    argsup: int
    std_error: float
    bound: float
    mu_V: float
    estimates: np.ndarray
    holds: bool


def stationary_moment_bound(model, spec, n_max, replicates, seed):
    """Compare ``sup_{n <= n_max} E V(X_n)`` (Monte Carlo) with ``mu(V) + b / (1 - lambda_d)``."""
    mu_V = model.mu_V(spec.V)
    if not math.isfinite(mu_V):
        raise ValueError("mu(V) is not finite")
    bound = mu_V + spec.b / (1.0 - spec.lambda_d)
    rng = as_rng(seed)
    m0, s0 = model.init_moments()
    x = m0 + s0 * rng.standard_normal(replicates)
    est = np.empty(n_max + 1)
    se = np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n > 0:
            x = model.step(x, rng)
        v = spec.V(x)
        est[n] = fsum_mean(v)
        se[n] = v.std(ddof=1) / math.sqrt(replicates) if replicates > 1 else 0.0
    k = int(np.argmax(est))
    return MomentBoundReport(sup_estimate=float(est[k]), argsup=k, std_error=float(se[k]),
                             bound=bound, mu_V=mu_V, estimates=est,
                             holds=bool(est[k] <= bound + 3 * se[k]))


# ---------------------------------------------------------------------------
# Finite chains
# ---------------------------------------------------------------------------


def stationary_distribution(P):
    """Stationary vector of an irreducible row-stochastic ``P`` (direct linear solve)."""
    m = P.shape[0]
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    pi = linalg.solve(A, rhs)
    return pi / pi.sum()


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Finite-state chain; ``states`` are the real values the chain sits on."""

    P: np.ndarray
    states: Optional[np.ndarray] = None
    pi: np.ndarray = field(init=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1)) > 1e-12:
            raise ValueError("transition matrix is not row-stochastic")
        object.__setattr__(self, "P", P)
        states = np.arange(P.shape[0], dtype=float) if self.states is None else np.asarray(
            self.states, dtype=float)
        object.__setattr__(self, "states", states)
        try:
            pi = stationary_distribution(P)
        except linalg.LinAlgError:
            pi = np.full(P.shape[0], np.nan)
        object.__setattr__(self, "pi", pi)

    @property
    def m(self):
        return self.P.shape[0]

    @classmethod
    def two_state(cls, a, b):
        """``P = [[1 - a, a], [b, 1 - b]]``."""
        return cls(np.array([[1 - a, a], [b, 1 - b]]))

    @classmethod
    def random(cls, m, rng, concentration=1.0):
        rng = as_rng(rng)
        return cls(rng.dirichlet(np.full(m, concentration), size=m))

    def sample_path(self, n, rng, x0=0):
        rng = as_rng(rng)
        cum = np.cumsum(self.P, axis=1)
        u = rng.random(n)
        out = np.empty(n + 1, dtype=np.intp)
        out[0] = x0
        for i in range(n):
            out[i + 1] = min(np.searchsorted(cum[out[i]], u[i], side="right"), self.m - 1)
        return out


def load_chain(path):
    """Read a row-stochastic matrix from a whitespace-separated text file."""
    return FiniteChain(np.loadtxt(path, ndmin=2))


@dataclass
class ErgodicityReport:
    rho: float
    prefactor: float
    ergodic: bool
    distances: np.ndarray


def ergodicity_rate(chain, V=None, alpha=1.0, n_max=60):
    """Second-largest eigenvalue modulus and an empirical prefactor.

    ``distances[n, x] = sum_y |P^n(x, y) - pi(y)| V(y)**alpha``, the
    largest deviation ``|P^n f(x) - pi(f)|`` over ``|f| <= V**alpha``.
    The prefactor is ``max_{n, x} distances[n, x] / (rho**n V(x)**alpha)``.
    """
    P = chain.P
    m = chain.m
    if m == 2:
        # exact: the non-unit eigenvalue of a 2x2 stochastic matrix is trace - 1
        rho = abs(P[0, 0] + P[1, 1] - 1.0)
    else:
        ev = np.sort(np.abs(linalg.eigvals(P)))[::-1]
        rho = float(ev[1]) if m > 1 else 0.0
    ergodic = rho < 1 - 1e-12 and np.all(np.isfinite(chain.pi))
    Vw = np.ones(m) if V is None else np.asarray(V, dtype=float) ** alpha
    dist = np.empty((n_max + 1, m))
    Pn = np.eye(m)
    for n in range(n_max + 1):
        dist[n] = np.abs(Pn - chain.pi) @ Vw
        Pn = Pn @ P
    if not ergodic:
        prefactor = math.inf
    elif rho == 0:
        prefactor = float(np.max(dist[0] / Vw))
    else:
        n = np.arange(n_max + 1)[:, None]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            ratio = dist / (rho**n * Vw)
        # once the distance hits rounding level the ratio is noise
        ratio[dist < 1e-13] = 0.0
        prefactor = float(np.nanmax(ratio))
    return ErgodicityReport(rho=float(rho), prefactor=prefactor, ergodic=bool(ergodic),
                            distances=dist)


@dataclass
class PoissonSolution:
    g: np.ndarray
    g_series: np.ndarray
    f_bar: np.ndarray
    residual_solve: float
    residual_series: float
    series_tail_bound: float
    n_terms: int

    @property
    def agreement(self):
        return float(np.max(np.abs(self.g - self.g_series)))


def poisson_residual(chain, f, g):
    """``max |g - P g - (f - pi(f))|``."""
    f = np.asarray(f, dtype=float)
    return float(np.max(np.abs(g - chain.P @ g - (f - chain.pi @ f))))


def poisson_solve_finite(chain, f, n_terms=None):
    """Solve ``g - P g = f - pi(f)`` with ``pi(g) = 0``, by linear solve and by series.

    The normalisation ``pi(g) = 0`` is the one of ``g = sum_l (P^l f - pi(f))``.
    The series is truncated after ``n_terms + 1`` terms (default: enough for
    ``rho**(L+1) < 1e-17``).
    """
    f = np.asarray(f, dtype=float)
    er = ergodicity_rate(chain)
    if not er.ergodic:
        raise ValueError(f"chain is not ergodic (rho = {er.rho})")
    pi = chain.pi
    fbar = f - pi @ f
    A = np.eye(chain.m) - chain.P + np.outer(np.ones(chain.m), pi)
    try:
        g = linalg.solve(A, fbar)
    except linalg.LinAlgError as exc:
        raise ValueError("singular Poisson system") from exc
    if n_terms is None:
        n_terms = 0 if er.rho == 0 else min(100_000, int(math.ceil(math.log(1e-17) / math.log(er.rho))))
    gs = np.zeros(chain.m)
    term = f.copy()
    for _ in range(n_terms + 1):
        gs += term - pi @ f
        term = chain.P @ term
    tail = er.prefactor * np.max(np.abs(f)) * er.rho ** (n_terms + 1) / (1 - er.rho)
    return PoissonSolution(g=g, g_series=gs, f_bar=fbar,
                           residual_solve=poisson_residual(chain, f, g),
                           residual_series=poisson_residual(chain, f, gs),
                           series_tail_bound=float(tail), n_terms=n_terms)


@dataclass(frozen=True, eq=False)
class FiniteJointChain:
    """Finite covariate chain plus a finite error alphabet.

    ``error_probs[s, a]`` is the probability of error value ``errors[a]``
    when the chain sits in state ``s``; ``r_values[s]`` is the regression
    function at state ``s``.
    """

    chain: FiniteChain
    errors: np.ndarray
    error_probs: np.ndarray
    r_values: np.ndarray

    def __post_init__(self):
        ep = np.asarray(self.error_probs, dtype=float)
        if ep.shape != (self.chain.m, len(self.errors)):
            raise ValueError("error_probs must have shape (states, errors)")
        if np.max(np.abs(ep.sum(axis=1) - 1)) > 1e-12:
            raise ValueError("error distributions must sum to one")
        object.__setattr__(self, "error_probs", ep)
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=float))
        object.__setattr__(self, "r_values", np.asarray(self.r_values, dtype=float))

    def responses(self):
        """``Y`` values as an array ``(states, errors)``."""
        return self.r_values[:, None] + self.errors[None, :]

    def conditional_mean(self, psi):
        """``E[psi(Y) | X = s]`` for every state."""
        return np.sum(self.error_probs * psi(self.responses()), axis=1)

    def mean_error(self):
        """``sum_s pi(s) E[eps | X = s]``."""
        return float(self.chain.pi @ (self.error_probs @ self.errors))

    def simulate(self, n, rng, x0=0):
        """State indices ``0..n`` and error indices."""
        rng = as_rng(rng)
        s = self.chain.sample_path(n, rng, x0)
        cum = np.cumsum(self.error_probs, axis=1)
        u = rng.random(n + 1)
        a = np.minimum((u[:, None] >= cum[s]).sum(axis=1), len(self.errors) - 1)
        return s, a


@dataclass
class Poisson2Report:
    residual: float
    poisson1_residual: float


def poisson_identity2_check(joint, weights, psi, g):
    """Residual of the one-step martingale identity behind the Poisson decomposition.

    With ``F(s, y) = psi(y) w(s)``, ``f(s) = w(s) E[psi(Y) | X = s]`` and
    ``H = F + P g``, returns the largest
    ``|F(s, y) - pi(f) - (H(s, y) - E[H(X_1, Y_1) | X_0 = s])|`` over all
    ``(state, error)`` pairs, together with the Poisson residual of ``g``.
    """
    chain = joint.chain
    w = np.asarray(weights, dtype=float)
    Y = joint.responses()
    F = psi(Y) * w[:, None]
    f = w * joint.conditional_mean(psi)
    Pg = chain.P @ g
    H = F + Pg[:, None]
    EH_next = chain.P @ np.sum(joint.error_probs * H, axis=1)
    lhs = F - chain.pi @ f
    rhs = H - EH_next[:, None]
    return Poisson2Report(residual=float(np.max(np.abs(lhs - rhs))),
                          poisson1_residual=poisson_residual(chain, f, g))
