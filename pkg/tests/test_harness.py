import json
from pathlib import Path

import pytest
import yaml

from marlab import cli, harness
from marlab.harness import ConfigError, derive_seed, resolve_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

THM2 = {"experiment": "inequality",
        "inequality": {"generator": "rademacher_nested", "p": 2, "schedule": {"exponent": 1.0},
                       "n": 1, "N": 3, "lambda_grid": [0.5], "mode": "exact"}}


def write(tmp_path, cfg, name="cfg.yaml"):
    f = tmp_path / name
    f.write_text(yaml.safe_dump(cfg))
    return str(f)


# -- seeds ------------------------------------------------------------------------


def test_derive_seed_distinct_indices_and_labels():
    assert derive_seed(5, 0, "path") != derive_seed(5, 1, "path")
    assert derive_seed(5, 0, "path") != derive_seed(5, 0, "noise")
    assert derive_seed(5, 0, "path") != derive_seed(6, 0, "path")


def test_derive_seed_fixed_values():
    assert derive_seed(42, 0, "path") == 15585891505168826391
    assert derive_seed(0, 0, "path") == 15216865910657053736


def test_derive_seed_range():
    seeds = {derive_seed(1, i, "x") for i in range(10_000)}
    assert len(seeds) == 10_000 and all(0 <= s < 2**64 for s in seeds)


# -- validation ---------------------------------------------------------------------


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as exc:
        resolve_config({**THM2, "replicate": 3})
    assert exc.value.path == "replicate"


def test_unknown_nested_key_path():
    cfg = {**THM2, "inequality": {**THM2["inequality"], "schedule": {"exponant": 1}}}
    with pytest.raises(ConfigError) as exc:
        resolve_config(cfg)
    assert exc.value.path == "inequality.schedule.exponant"


def test_missing_required_key():
    cfg = {"experiment": "inequality", "inequality": {"schedule": {"exponent": 1}}}
    with pytest.raises(ConfigError) as exc:
        resolve_config(cfg)
    assert exc.value.path == "inequality.N"


def test_beta_outside_open_interval():
    cfg = {"experiment": "regression", "regression": {"beta": 0.3}}
    with pytest.raises(ConfigError, match=r"open interval \(0, 1/4\)") as exc:
        resolve_config(cfg)
    assert exc.value.path == "regression.beta"


@pytest.mark.parametrize("kind", ["bogus", None])
def test_unknown_experiment(kind):
    with pytest.raises(ConfigError):
        resolve_config({"experiment": kind})


def test_kind_mismatch():
    with pytest.raises(ConfigError):
        resolve_config(THM2, kind="slln")


def test_resolved_config_has_defaults():
    cfg = resolve_config(THM2)
    assert cfg["seed"] == 0 and cfg["inequality"]["replicates"] == 10_000
    assert cfg["output"] == {"dir": ".", "csv": None}


# -- runs --------------------------------------------------------------------------


def test_thm2_example_run(tmp_out):
    rep = run(THM2, out=str(tmp_out))
    assert rep.passed
    lines = (tmp_out / "inequality.csv").read_text().splitlines()
    assert lines[0] == "lambda,lhs,rhs_term1,rhs_term2,rhs_term3,holds"
    assert lines[1].startswith("0.5,0.0625,") and lines[1].endswith(",true")
    meta = json.loads((tmp_out / "inequality.json").read_text())
    assert meta["config"]["inequality"]["N"] == 3 and meta["passed"]
    assert meta["version"] == harness.__version__


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")
                                        if "regression" not in p.name
                                        and "slln" not in p.name))
def test_archived_configs_byte_reproducible(tmp_path, name):
    a = run(str(CONFIGS / name), out=str(tmp_path / "a"))
    b = run(str(CONFIGS / name), out=str(tmp_path / "b"))
    assert Path(a.csv_path).read_bytes() == Path(b.csv_path).read_bytes()
    assert a.passed


def test_seed_override_changes_monte_carlo(tmp_path):
    cfg = {"experiment": "inequality",
           "inequality": {"generator": "gaussian", "schedule": {"exponent": 1.0}, "N": 10,
                          "mode": "mc", "replicates": 500}}
    a = run(cfg, seed=1, write=False)
    b = run(cfg, seed=2, write=False)
    assert a.rows != b.rows
    assert a.config["seed"] == 1


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MARLAB_OUT", str(tmp_path / "env"))
    rep = run(THM2)
    assert Path(rep.csv_path).parent == tmp_path / "env"
    rep = run(THM2, out=str(tmp_path / "flag"))
    assert Path(rep.csv_path).parent == tmp_path / "flag"


def test_small_slln_run(tmp_out):
    cfg = {"experiment": "slln",
           "slln": {"generator": "tilted", "schedule": {"exponent": 1.0}, "horizon": 256,
                    "replicates": 100, "seeds": 5}}
    rep = run(cfg, out=str(tmp_out))
    assert rep.columns == ("n", "term_a", "term_b", "r_partial_sum", "running_sup_median",
                           "running_sup_q95")
    assert len(rep.rows) == 8


def test_small_regression_run(tmp_out):
    cfg = {"experiment": "regression", "regression": {"n_grid": [100, 1000], "seeds": 3}}
    rep = run(cfg, out=str(tmp_out))
    assert rep.columns == ("n", "seed", "r_hat_psi", "r_hat", "bias", "boundary", "error")
    assert len(rep.rows) == 6


def test_overall_verdict_is_conjunction():
    rep = harness.Report(config={}, columns=(), rows=[], verdicts={"a": True, "b": False})
    assert not rep.passed
    rep.verdicts["b"] = True
    assert rep.passed


# -- command line -------------------------------------------------------------------


def test_cli_pass(tmp_out, capsys):
    assert cli.main(["verify-inequality", "--config", str(CONFIGS / "thm2_worked.yaml"),
                     "--out", str(tmp_out)]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_cli_flags_without_config(tmp_out):
    code = cli.main(["verify-inequality", "--generator", "skewed_nested", "--p", "3",
                     "--schedule", "values:1,0.5,0.5,0.25", "--n", "2", "--N", "4",
                     "--lambda-grid", "0.1,1,10", "--mode", "exact", "--output", "sk.csv",
                     "--out", str(tmp_out)])
    assert code == 0
    assert len((tmp_out / "sk.csv").read_text().splitlines()) == 4


def test_cli_validation_error(tmp_out, capsys):
    cfg = write(tmp_out, {"experiment": "regression", "regression": {"beta": 0.3}})
    assert cli.main(["kernel-regression", "--config", cfg, "--out", str(tmp_out)]) == 2
    assert "regression.beta" in capsys.readouterr().err


def test_cli_verdict_failure(tmp_out):
    # constant V with no offset violates the drift inequality everywhere
    cfg = {"experiment": "drift",
           "drift": {"V_coef": 0.0, "lambda_d": 0.5, "b": 0.0, "small_set": [-1, 1]}}
    assert cli.main(["check-drift", "--config", write(tmp_out, cfg), "--out",
                     str(tmp_out)]) == 1
    assert (tmp_out / "drift.csv").exists()


def test_cli_poisson_and_ergodicity(tmp_out):
    for sub, name in (("poisson", "poisson_two_state.yaml"),
                      ("ergodicity", "ergodicity_two_state.yaml")):
        assert cli.main([sub, "--config", str(CONFIGS / name), "--out", str(tmp_out)]) == 0
    rows = (tmp_out / "poisson.csv").read_text().splitlines()
    assert rows[0] == "state,f,f_bar,g_solve,g_series"


def test_cli_matrix_file(tmp_out):
    (tmp_out / "P.txt").write_text("0.5 0.5\n0.5 0.5\n")
    cfg = {"experiment": "ergodicity", "ergodicity": {"matrix_file": str(tmp_out / "P.txt")}}
    assert cli.main(["ergodicity", "--config", write(tmp_out, cfg), "--out",
                     str(tmp_out)]) == 0
    meta = json.loads((tmp_out / "ergodicity.json").read_text())
    assert meta["metrics"]["rho"] == 0.0


def test_cli_non_ergodic_chain_fails(tmp_out):
    cfg = {"experiment": "ergodicity", "ergodicity": {"matrix": [[1, 0], [0, 1]]}}
    assert cli.main(["ergodicity", "--config", write(tmp_out, cfg), "--out",
                     str(tmp_out)]) == 1


def test_cli_missing_file(tmp_out):
    assert cli.main(["slln", "--config", str(tmp_out / "nope.yaml")]) == 2


def test_cli_console_script(tmp_out):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "marlab.cli", "poisson", "--config",
                           str(CONFIGS / "poisson_two_state.yaml"), "--out", str(tmp_out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
