"""Acceptance criteria, one test per criterion.

Each criterion is checked at its stated tolerance and runtime limit and
records a single ``PASS``/``FAIL`` line, printed in the pytest terminal
summary.  Run the file directly (``python tests/test_acceptance.py``) to
get just those lines.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from marlab import arrays, harness, inequality_lab as il, kernel_regression as kr
from marlab import markov_engine as me
from marlab.arrays import WeightSchedule
from marlab.slln_diagnostics import corollary1_terms, diagonal_paths

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

RESULTS = []

FINITE_FAMILIES = [
    arrays.rademacher_nested(),
    arrays.skewed_nested(),
    arrays.predictable_nested(0.5),
    arrays.tilted_array(0.5, 0.5),
    arrays.alternating_array(0.7),
    arrays.tilted_array(1.0, -0.3, values=(-1.0, 0.0, 2.0), probs=(0.5, 0.25, 0.25)),
]

LAMBDAS = np.geomspace(0.05, 20.0, 20)


def schedules(p):
    return {"1/n": WeightSchedule.power(1.0, p=p), "n^-0.8": WeightSchedule.power(0.8, p=p),
            "constant": WeightSchedule.power(0.0, p=p)}


def anchors(N):
    return sorted({1, (N + 1) // 2, N})


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    return ok


# ---------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    cases = 0
    worst = math.inf
    failures = []
    for dist in FINITE_FAMILIES:
        for N in range(1, 13):
            for p in (1, 2, 3):
                for label, w in schedules(p).items():
                    for n in anchors(N):
                        for rep in il.thm2_sweep(dist, w, n, N, LAMBDAS):
                            cases += 1
                            worst = min(worst, rep.margin)
                            if not (rep.holds and rep.margin >= 0):
                                failures.append((dist.name, N, p, label, n, rep.lam))
    ex = il.thm2_check(arrays.rademacher_nested(), WeightSchedule.power(1.0, p=2), 1, 3, 0.5)
    worked = ex.lhs == 0.0625 and abs(ex.rhs - 49 / 36) < 1e-15
    dt = time.perf_counter() - t0
    ok = not failures and worked and dt < 60
    return record(1, ok, f"{cases} exact cases, min margin {worst:.3g}, worked case lhs={ex.lhs} "
                         f"rhs={ex.rhs:.6f}, {len(failures)} violations, {dt:.1f}s < 60s")


def criterion_2():
    t0 = time.perf_counter()
    cases = 0
    failures = []
    for dist in FINITE_FAMILIES:
        for N in range(1, 13):
            for p in (1, 2, 3):
                for label, w in schedules(p).items():
                    for n in anchors(N):
                        rep = il.cbm_bound(dist, w, n, N)
                        cases += 1
                        if not (rep.holds and rep.margin >= 0):
                            failures.append((dist.name, N, p, label, n))
    ex = il.cbm_bound(arrays.rademacher_nested(), WeightSchedule.power(1.0, p=2), 1, 3)
    worked = ex.lhs == 1.0 and abs(ex.rhs - 49 / 36) < 1e-15
    dt = time.perf_counter() - t0
    return record(2, not failures and worked,
                  f"{cases} exact single-row cases, {len(failures)} violations, {dt:.1f}s")


def criterion_3():
    t0 = time.perf_counter()
    const_ok = il.burkholder_constant(2) == 2592
    cases = 0
    failures = []
    for dist in FINITE_FAMILIES:
        for n in range(1, 13):
            for p in (1.5, 2, 3):
                for k in range(1, n + 1):
                    rep = il.burkholder_check(dist, p, n, k)
                    cases += 1
                    if not rep.holds:
                        failures.append((dist.name, n, p, k))
    reps, k = 200_000, 20
    g = il.burkholder_check(arrays.NestedIID(), 4, k, k, mode=il.MONTE_CARLO, replicates=reps,
                            seed=2024)
    sample = il.path_sample(arrays.NestedIID(), k, il.MONTE_CARLO, reps, 2024)
    m4 = np.abs(sample.M[:, k - 1]) ** 4
    se = m4.std(ddof=1) / math.sqrt(reps)
    oracle = 3 * k**2
    gauss_ok = g.holds and abs(g.lhs - oracle) <= 3 * se
    dt = time.perf_counter() - t0
    ok = const_ok and not failures and gauss_ok and dt < 60
    return record(3, ok, f"C(2)={il.burkholder_constant(2)}, {cases} exact cases with "
                         f"{len(failures)} violations, Gaussian E|M|^4={g.lhs:.1f} vs {oracle} "
                         f"(3 se = {3 * se:.1f}), {dt:.1f}s < 60s")


def criterion_4():
    t0 = time.perf_counter()
    sol = me.poisson_solve_finite(me.FiniteChain.two_state(0.3, 0.2), [1.0, 0.0])
    closed = np.max(np.abs(sol.g - [1.2, -0.8]))
    rng = np.random.default_rng(20261016)
    worst_agree = 0.0
    worst_id2 = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 11))
        chain = me.FiniteChain.random(m, rng)
        f = rng.standard_normal(m)
        s = me.poisson_solve_finite(chain, f)
        worst_agree = max(worst_agree, s.agreement)
        a = int(rng.integers(1, 4))
        joint = me.FiniteJointChain(chain=chain, errors=rng.standard_normal(a),
                                    error_probs=rng.dirichlet(np.ones(a), size=m),
                                    r_values=rng.standard_normal(m))
        w = rng.uniform(0, 1, m)
        psi = np.square
        fw = w * joint.conditional_mean(psi)
        g = me.poisson_solve_finite(chain, fw).g
        worst_id2 = max(worst_id2, me.poisson_identity2_check(joint, w, psi, g).residual)
    dt = time.perf_counter() - t0
    ok = closed <= 1e-12 and worst_agree <= 1e-10 and worst_id2 <= 1e-10 and dt < 30
    return record(4, ok, f"two-state error {closed:.2e}, series/solve {worst_agree:.2e} over 100 "
                         f"chains, identity residual {worst_id2:.2e}, {dt:.1f}s < 30s")


def criterion_5():
    t0 = time.perf_counter()
    model = me.AR1Model(phi=0.5, sigma=1.0, tau=0.5)
    c = 2 * math.sqrt(1.5)
    spec = me.DriftSpec(V=me.quadratic_V(), lambda_d=0.5, b=1.5, small_set=(-c, c))
    dr = me.drift_margin(model, spec, np.linspace(-10, 10, 2001))
    mb = me.stationary_moment_bound(model, spec, 50, 50_000, seed=5)
    rho = me.ergodicity_rate(me.FiniteChain.two_state(0.3, 0.2)).rho
    dt = time.perf_counter() - t0
    ok = (dr.margin >= 0 and mb.bound == 4.0 and mb.sup_estimate <= 4.0 and mb.holds
          and abs(mb.sup_estimate - 7 / 3) <= 0.05 and rho == 0.5 and dt < 60)
    return record(5, ok, f"drift margin {dr.margin:.3g}, sup E V(X_n) = {mb.sup_estimate:.4f} "
                         f"(bound {mb.bound}), rho = {rho!r}, {dt:.1f}s < 60s")


def criterion_6():
    t0 = time.perf_counter()
    model = me.AR1Model(phi=0.5, sigma=1.0, tau=0.5, r=np.sin)
    seeds = [harness.derive_seed(6, i, "path") for i in range(50)]
    grid = [1000, 10_000, 100_000]
    out = {}
    for psi in ("one", "identity"):
        problem = kr.RegressionProblem(model=model, psi=psi, x0=0.0,
                                       kernel=kr.gaussian_kernel(),
                                       bandwidth=kr.BandwidthSchedule(0.2))
        out[psi] = kr.consistency_experiment(problem, grid, seeds)
    one, ident = out["one"], out["identity"]
    dt = time.perf_counter() - t0
    ok = (abs(one.target - 0.3455) < 5e-5 and one.medians[-1] < 0.03 and one.passed
          and ident.target == 0.0 and ident.medians[-1] < 0.02 and dt < 600)
    return record(6, ok, f"psi=1 median errors {np.round(one.medians, 4).tolist()} (target "
                         f"{one.target:.4f}), psi=y median error {ident.medians[-1]:.4f}, "
                         f"{dt:.1f}s < 600s")


def criterion_7():
    t0 = time.perf_counter()
    dist = kr.ChainKernelArray(problem=kr.RegressionProblem(bandwidth=kr.BandwidthSchedule(0.2)))
    w = WeightSchedule.power(0.8, p=2)  # c_n = 1 / (n h_n)
    rep = corollary1_terms(dist, w, n0=1, horizon=2**12, replicates=1000, seed=7)
    r_slope = rep.slopes["r_increment"]
    a_slope = rep.slopes["term_a[n0=1]"]
    dt = time.perf_counter() - t0
    ok = abs(r_slope + 1.1) <= 0.15 and abs(a_slope + 0.6) <= 0.15 and dt < 300
    return record(7, ok, f"r_series increment slope {r_slope:.3f} (want -1.1 +- 0.15), term_a "
                         f"slope {a_slope:.3f} (want -0.6 +- 0.15), {dt:.1f}s < 300s")


def criterion_8():
    t0 = time.perf_counter()
    dp = diagonal_paths(arrays.rademacher_nested(), WeightSchedule.power(1.0, p=2),
                        [harness.derive_seed(8, i, "path") for i in range(100)], 100_000)
    below = int(np.sum(dp.at(10_000) < 0.05))
    dt = time.perf_counter() - t0
    return record(8, below >= 95 and dt < 60,
                  f"{below}/100 seeds with running sup < 0.05 at n = 10^4, {dt:.1f}s < 60s")


def criterion_9(tmp):
    names = sorted(p.name for p in CONFIGS.glob("*.yaml"))
    same = []
    for name in names:
        a = harness.run(str(CONFIGS / name), out=str(Path(tmp) / "a" / name))
        b = harness.run(str(CONFIGS / name), out=str(Path(tmp) / "b" / name))
        same.append(Path(a.csv_path).read_bytes() == Path(b.csv_path).read_bytes())
    return record(9, all(same) and len(names) > 0,
                  f"{sum(same)}/{len(names)} archived configs byte-identical on re-run")


# ---------------------------------------------------------------------------


def test_criterion_1_exact_array_inequality():
    assert criterion_1()


def test_criterion_2_exact_single_martingale_inequality():
    assert criterion_2()


def test_criterion_3_moment_bound():
    assert criterion_3()


def test_criterion_4_poisson_oracles():
    assert criterion_4()


def test_criterion_5_drift_and_ergodicity():
    assert criterion_5()


def test_criterion_6_kernel_regression_consistency():
    assert criterion_6()


def test_criterion_7_rate_diagnostics():
    assert criterion_7()


def test_criterion_8_diagonal_trajectories():
    assert criterion_8()


def test_criterion_9_determinism(tmp_path):
    assert criterion_9(tmp_path)


if __name__ == "__main__":
    import tempfile

    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
               criterion_7, criterion_8):
        fn()
    with tempfile.TemporaryDirectory() as d:
        criterion_9(d)
