"""Reproducible experiment runner.

An experiment is described by a YAML (or JSON) document.  The top level
has the keys ``experiment``, ``seed``, ``output`` and one block named
after the experiment kind; every key is validated against the schema in
:data:`SCHEMAS` and unknown keys are rejected with their full path.

Each run writes ``<out>/<kind>.csv`` (the numeric table) and
``<out>/<kind>.json`` (resolved config, verdicts, timing, version).
Numbers in the CSV are written with ``repr`` so a re-run of the same
config reproduces the file byte for byte.
"""

import copy
import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from . import arrays, inequality_lab, kernel_regression as kr, markov_engine as me
from . import slln_diagnostics as sd

OUT_ENV = "MARLAB_OUT"

KINDS = ("inequality", "slln", "drift", "poisson", "ergodicity", "regression")

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def derive_seed(master_seed, replicate_index, stream_label):
    """64-bit substream seed: first 8 bytes (little-endian) of BLAKE2b over
    ``"<master>:<index>:<label>"``.  Identical on every platform."""
    msg = f"{int(master_seed)}:{int(replicate_index)}:{stream_label}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

_GENERATOR = {"generator": "rademacher_nested", "generator_params": {}}
_CHAIN = {"phi": 0.5, "sigma": 1.0, "tau": 0.5}

SCHEMAS = {
    "inequality": {
        **_GENERATOR,
        "check": "thm2",
        "p": 2.0,
        "schedule": {"exponent": None, "values": None},
        "n": 1,
        "N": REQUIRED,
        "lambda_grid": [1.0],
        "mode": "exact",
        "replicates": 10_000,
        "row": None,
    },
    "slln": {
        **_GENERATOR,
        "p": 2.0,
        "schedule": {"exponent": None, "values": None},
        "n0": 1,
        "horizon": 1024,
        "replicates": 1000,
        "seeds": 20,
        "paths_horizon": None,
    },
    "drift": {
        "chain": dict(_CHAIN),
        "V_coef": 1.0,
        "lambda_d": REQUIRED,
        "b": REQUIRED,
        "small_set": REQUIRED,
        "grid": {"lo": -10.0, "hi": 10.0, "points": 2001},
        "moment_bound": {"n_max": 0, "replicates": 10_000},
        "init": {"x": 0.0, "sd": 0.0},
    },
    "poisson": {
        "matrix": None,
        "matrix_file": None,
        "f": REQUIRED,
        "n_terms": None,
    },
    "ergodicity": {
        "matrix": None,
        "matrix_file": None,
        "n_max": 60,
        "V": None,
        "alpha": 1.0,
    },
    "regression": {
        "chain": dict(_CHAIN),
        "r": "sin",
        "psi": "one",
        "kernel": "gaussian",
        "beta": 0.2,
        "x0": 0.0,
        "n_grid": [1000, 10_000],
        "seeds": 20,
        "max_median_error": None,
    },
}

TOP = {"experiment": REQUIRED, "seed": 0, "output": {"dir": ".", "csv": None}}


def _resolve(value, schema, path):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected a mapping, got {type(value).__name__}")
    unknown = sorted(set(value) - set(schema))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    out = {}
    for key, default in schema.items():
        kp = f"{path}.{key}" if path else key
        if key not in value:
            if default is REQUIRED:
                raise ConfigError(kp, "missing required key")
            out[key] = copy.deepcopy(default)
        elif isinstance(default, dict) and default and key not in ("generator_params",):
            out[key] = _resolve(value[key], default, kp)
        else:
            out[key] = value[key]
    return out


def resolve_config(raw, kind=None):
    """Validate ``raw`` and fill defaults; ``kind`` (from the CLI) must match ``experiment``."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping")
    raw = dict(raw)
    if kind is not None:
        raw.setdefault("experiment", kind)
        if raw["experiment"] != kind:
            raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {kind!r}")
    kind = raw.get("experiment")
    if kind not in KINDS:
        raise ConfigError("experiment", f"must be one of {', '.join(KINDS)}")
    cfg = _resolve({k: v for k, v in raw.items() if k != kind}, TOP, "")
    cfg[kind] = _resolve(raw.get(kind) or {}, SCHEMAS[kind], kind)
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg):
    kind = cfg["experiment"]
    block = cfg[kind]
    try:
        cfg["seed"] = int(cfg["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed", "must be an integer") from None
    if kind == "regression":
        try:
            kr.BandwidthSchedule(float(block["beta"]))
        except ValueError as exc:
            raise ConfigError(f"{kind}.beta", str(exc)) from None
        for key, table in (("r", R_FUNCS), ("psi", kr.PSI), ("kernel", kr.KERNELS)):
            if block[key] not in table:
                raise ConfigError(f"{kind}.{key}", f"must be one of {sorted(table)}")
    if kind in ("inequality", "slln"):
        if block["generator"] not in GENERATORS:
            raise ConfigError(f"{kind}.generator", f"must be one of {sorted(GENERATORS)}")
        sched = block["schedule"]
        if (sched["exponent"] is None) == (sched["values"] is None):
            raise ConfigError(f"{kind}.schedule", "give exactly one of exponent or values")
    if kind == "inequality":
        if block["check"] not in ("thm2", "cbm", "burkholder"):
            raise ConfigError("inequality.check", "must be thm2, cbm or burkholder")
        if block["mode"] not in (inequality_lab.EXACT, inequality_lab.MONTE_CARLO):
            raise ConfigError("inequality.mode", "must be 'exact' or 'mc'")
        if any(float(v) <= 0 for v in block["lambda_grid"]):
            raise ConfigError("inequality.lambda_grid", "thresholds must be > 0")
    if kind in ("poisson", "ergodicity"):
        if (block["matrix"] is None) == (block["matrix_file"] is None):
            raise ConfigError(f"{kind}.matrix", "give exactly one of matrix or matrix_file")


# ---------------------------------------------------------------------------
# Registries
# ---------------------------------------------------------------------------

R_FUNCS = {"sin": np.sin, "cos": np.cos, "zero": np.zeros_like, "identity": lambda x: x}


def _chain_kernel(params):
    params = dict(params)
    model = me.AR1Model(phi=params.pop("phi", 0.5), sigma=params.pop("sigma", 1.0),
                        tau=params.pop("tau", 0.5), r=R_FUNCS[params.pop("r", "sin")])
    problem = kr.RegressionProblem(model=model, psi=params.pop("psi", "one"),
                                   x0=params.pop("x0", 0.0),
                                   kernel=kr.KERNELS[params.pop("kernel", "gaussian")](),
                                   bandwidth=kr.BandwidthSchedule(params.pop("beta", 0.2)))
    if params:
        raise TypeError(f"unexpected parameters {sorted(params)}")
    return kr.ChainKernelArray(problem=problem)


def _explicit(params):
    return arrays.load_array(params["file"]).dist


GENERATORS = {
    "rademacher_nested": lambda p: arrays.rademacher_nested(**p),
    "skewed_nested": lambda p: arrays.skewed_nested(**p),
    "predictable_nested": lambda p: arrays.predictable_nested(**p),
    "tilted": lambda p: arrays.tilted_array(**p),
    "alternating": lambda p: arrays.alternating_array(**p),
    "gaussian": lambda p: arrays.NestedIID(**p),
    "chain_kernel": _chain_kernel,
    "explicit": _explicit,
}


def make_generator(block, path):
    try:
        return GENERATORS[block["generator"]](block["generator_params"] or {})
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}.generator_params", str(exc)) from None


def make_schedule(block):
    s = block["schedule"]
    if s["values"] is not None:
        return arrays.WeightSchedule.explicit(s["values"], p=float(block["p"]))
    return arrays.WeightSchedule.power(float(s["exponent"]), p=float(block["p"]))


def _seed_list(spec, master, label):
    if isinstance(spec, int):
        return [derive_seed(master, i, label) for i in range(spec)]
    return [int(s) for s in spec]


def _matrix(block):
    if block["matrix_file"] is not None:
        return me.load_chain(block["matrix_file"])
    return me.FiniteChain(np.asarray(block["matrix"], dtype=float))


# ---------------------------------------------------------------------------
# Runners: each returns (columns, rows, verdicts, extra)
# ---------------------------------------------------------------------------


def _run_inequality(b, seed):
    dist = make_generator(b, "inequality")
    w = make_schedule(b)
    mode = b["mode"]
    reps = int(b["replicates"])
    n, N = int(b["n"]), int(b["N"])
    cols = ("lambda", "lhs", "rhs_term1", "rhs_term2", "rhs_term3", "holds")
    rows = []
    if b["check"] == "thm2":
        for rep in inequality_lab.thm2_sweep(dist, w, n, N, b["lambda_grid"], mode, reps, seed):
            rows.append((rep.lam, rep.lhs, *rep.terms, rep.holds))
    elif b["check"] == "cbm":
        rep = inequality_lab.cbm_bound(dist, w, n, N, mode, b["row"], reps, seed)
        rows.append(("", rep.lhs, rep.rhs, 0.0, 0.0, rep.holds))
    else:
        rep = inequality_lab.burkholder_check(dist, w.p, N, n, mode, reps, seed)
        rows.append(("", rep.lhs, rep.rhs, 0.0, 0.0, rep.holds))
    verdicts = {"holds": all(r[-1] for r in rows)}
    return cols, rows, verdicts, {}


def _run_slln(b, seed):
    dist = make_generator(b, "slln")
    w = make_schedule(b)
    rep = sd.corollary1_terms(dist, w, b["n0"], int(b["horizon"]), int(b["replicates"]),
                              derive_seed(seed, 0, "terms"))
    seeds = _seed_list(b["seeds"], seed, "path")
    ph = int(b["paths_horizon"] or b["horizon"])
    dp = sd.diagonal_paths(dist, w, seeds, ph)
    cols = ("n", "term_a", "term_b", "r_partial_sum", "running_sup_median", "running_sup_q95")
    rows = []
    ta = rep.term_a_worst()
    for j, n in enumerate(rep.grid):
        rs = dp.at(int(n)) if n <= ph else np.full(len(seeds), np.nan)
        rows.append((int(n), ta[j], rep.term_b[j], rep.r_partial_sum[j],
                     float(np.median(rs)), float(np.quantile(rs, 0.95))))
    extra = {"slopes": rep.slopes, "term_b_tail_extrapolation": rep.term_b_tail.tolist()}
    return cols, rows, dict(rep.verdicts), extra


def _run_drift(b, seed):
    ch = b["chain"]
    init = b["init"]
    model = me.AR1Model(phi=float(ch["phi"]), sigma=float(ch["sigma"]), tau=float(ch["tau"]),
                        x_init=float(init["x"]), init_sd=float(init["sd"]))
    spec = me.DriftSpec(V=me.quadratic_V(float(b["V_coef"])), lambda_d=float(b["lambda_d"]),
                        b=float(b["b"]), small_set=tuple(float(v) for v in b["small_set"]))
    g = b["grid"]
    grid = np.linspace(float(g["lo"]), float(g["hi"]), int(g["points"]))
    dr = me.drift_margin(model, spec, grid)
    cols = ("x", "V", "PV", "margin")
    rows = list(zip(grid.tolist(), spec.V(grid).tolist(), model.PV(spec.V, grid).tolist(),
                    dr.margins.tolist()))
    verdicts = {"drift": dr.holds}
    extra = {"min_margin": dr.margin, "argmin": dr.argmin}
    mb = b["moment_bound"]
    if int(mb["n_max"]) > 0:
        rep = me.stationary_moment_bound(model, spec, int(mb["n_max"]), int(mb["replicates"]),
                                         derive_seed(seed, 0, "moment"))
        verdicts["moment_bound"] = rep.holds
        extra.update(sup_EV=rep.sup_estimate, sup_EV_std_error=rep.std_error, bound=rep.bound)
    return cols, rows, verdicts, extra


def _run_poisson(b, seed):
    chain = _matrix(b)
    sol = me.poisson_solve_finite(chain, np.asarray(b["f"], dtype=float), b["n_terms"])
    cols = ("state", "f", "f_bar", "g_solve", "g_series")
    rows = [(i, float(b["f"][i]), sol.f_bar[i], sol.g[i], sol.g_series[i])
            for i in range(chain.m)]
    verdicts = {"solve_residual": sol.residual_solve <= 1e-10,
                "series_residual": sol.residual_series <= max(sol.series_tail_bound, 1e-10)}
    extra = {"residual_solve": sol.residual_solve, "residual_series": sol.residual_series,
             "series_tail_bound": sol.series_tail_bound, "agreement": sol.agreement}
    return cols, rows, verdicts, extra


def _run_ergodicity(b, seed):
    chain = _matrix(b)
    er = me.ergodicity_rate(chain, V=b["V"], alpha=float(b["alpha"]), n_max=int(b["n_max"]))
    cols = ("n", "max_distance")
    rows = [(n, float(er.distances[n].max())) for n in range(er.distances.shape[0])]
    return cols, rows, {"ergodic": er.ergodic}, {"rho": er.rho, "prefactor": er.prefactor}


def _run_regression(b, seed):
    ch = b["chain"]
    model = me.AR1Model(phi=float(ch["phi"]), sigma=float(ch["sigma"]), tau=float(ch["tau"]),
                        r=R_FUNCS[b["r"]])
    problem = kr.RegressionProblem(model=model, psi=b["psi"], x0=float(b["x0"]),
                                   kernel=kr.KERNELS[b["kernel"]](),
                                   bandwidth=kr.BandwidthSchedule(float(b["beta"])))
    seeds = _seed_list(b["seeds"], seed, "path")
    try:
        rep = kr.consistency_experiment(problem, b["n_grid"], seeds)
    except kr.PreconditionError as exc:
        raise ConfigError("regression", f"preconditions fail: {exc}") from None
    cols = ("n", "seed", "r_hat_psi", "r_hat", "bias", "boundary", "error")
    verdicts = {"median_error_non_increasing": rep.passed}
    if b["max_median_error"] is not None:
        verdicts["final_median_error"] = bool(rep.medians[-1] < float(b["max_median_error"]))
    extra = {"target": rep.target, "median_error": rep.medians.tolist()}
    return cols, rep.rows(), verdicts, extra


RUNNERS = {"inequality": _run_inequality, "slln": _run_slln, "drift": _run_drift,
           "poisson": _run_poisson, "ergodicity": _run_ergodicity,
           "regression": _run_regression}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    config: dict
    columns: tuple
    rows: list
    verdicts: dict
    extra: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__
    csv_path: str = None
    json_path: str = None

    @property
    def passed(self):
        return all(bool(v) for v in self.verdicts.values())

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self):
        return {"config": self.config, "verdicts": self.verdicts, "passed": self.passed,
                "metrics": _jsonable(self.extra), "wall_clock_seconds": self.wall_clock,
                "version": self.version}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def load_config(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


def run(config, kind=None, seed=None, out=None, write=True):
    """Validate and run one experiment; write CSV and JSON unless ``write`` is False.

    ``seed`` overrides the config's master seed.  The output directory is
    ``out``, else ``$MARLAB_OUT``, else ``output.dir`` of the config.
    """
    raw = load_config(config) if isinstance(config, (str, os.PathLike)) else copy.deepcopy(config)
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    cfg = resolve_config(raw, kind)
    kind = cfg["experiment"]
    t0 = time.perf_counter()
    cols, rows, verdicts, extra = RUNNERS[kind](cfg[kind], cfg["seed"])
    report = Report(config=cfg, columns=cols, rows=rows, verdicts=verdicts, extra=extra,
                    wall_clock=time.perf_counter() - t0)
    if write:
        outdir = out or os.environ.get(OUT_ENV) or cfg["output"]["dir"]
        os.makedirs(outdir, exist_ok=True)
        name = cfg["output"]["csv"] or f"{kind}.csv"
        report.csv_path = os.path.join(outdir, name)
        report.json_path = os.path.splitext(report.csv_path)[0] + ".json"
        with open(report.csv_path, "w", newline="") as fh:
            fh.write(report.csv_text())
        with open(report.json_path, "w") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
    return report
