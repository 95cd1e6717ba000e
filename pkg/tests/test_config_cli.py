import json

import pytest
import yaml

from fkpoisson.cli import main
from fkpoisson.config import ConfigError, build_problem, config_hash, load_config, validate
from fkpoisson.outputs import read_csv, write_csv, write_json


def small_config(tmp_path, **over):
    cfg = {
        "model": {"dimension": 1, "drift": ["-x"], "sigma": [["sqrt(2)"]]},
        "potential": "0.1",
        "source": "x",
        "simulation": {"dt": 0.01, "seed": 5, "N": 2000, "total_time": 500.0},
        "solve": {"points": [[1.0]], "tol": 0.02},
        "diagnostics": {
            "T_grid": [2.0, 4.0],
            "lmgf_N": 500,
            "tv_N": 4000,
            "tv_times": [0.5, 1.0, 1.5, 2.0, 3.0],
            "ensemble_N": 1000,
            "moment_times": [1.0, 2.0],
            "deviation_times": [1.0, 2.0, 3.0],
        },
        "crosscheck": {"growth_N": 500, "centering_budget": 500},
        "oracle": {"n": 256},
        "output": {"directory": str(tmp_path / "out")},
    }
    for k, v in over.items():
        if v is None:
            cfg.pop(k)
        elif isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    return cfg


def write(tmp_path, cfg, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def error_of(cfg):
    with pytest.raises(ConfigError) as info:
        validate(cfg)
    return str(info.value)


def test_missing_sigma_names_the_field(tmp_path):
    cfg = small_config(tmp_path)
    del cfg["model"]["sigma"]
    assert "model.sigma" in error_of(cfg)


def test_unknown_keys_are_errors(tmp_path):
    assert "simulation.sede" in error_of(small_config(tmp_path, simulation={"sede": 1}))
    assert "extra" in error_of(small_config(tmp_path, extra=1))


def test_seed_is_mandatory(tmp_path):
    cfg = small_config(tmp_path)
    del cfg["simulation"]["seed"]
    assert "simulation.seed" in error_of(cfg)


def test_beta_grid_must_contain_zero_and_symmetric_pair(tmp_path):
    assert "contain 0" in error_of(small_config(tmp_path, diagnostics={"beta_grid": [-0.1, 0.1]}))
    assert "+-h" in error_of(small_config(tmp_path, diagnostics={"beta_grid": [0.0, 0.1]}))


def test_gamma_guard(tmp_path):
    assert "gamma_guard" in error_of(small_config(tmp_path, diagnostics={"gamma": 0.6}))


def test_shape_checks(tmp_path):
    cfg = small_config(tmp_path, solve={"points": [[1.0, 2.0]]})
    assert "solve.points.0" in error_of(cfg)
    cfg = small_config(tmp_path)
    cfg["model"]["drift"] = ["-x", "-x"]
    assert "model.drift" in error_of(cfg)


def test_bad_expression_names_its_field(tmp_path):
    msg = error_of(small_config(tmp_path, potential="0.1*y"))
    assert msg.startswith("potential:") and "offset 4" in msg
    cfg = small_config(tmp_path)
    cfg["model"]["sigma"] = [["sqrt(2"]]
    assert error_of(cfg).startswith("model.sigma.0.0:")


def test_explicit_T_must_be_positive(tmp_path):
    assert "solve.T" in error_of(small_config(tmp_path, solve={"T": -1.0}))
    assert validate(small_config(tmp_path, solve={"T": 5.0})).solve.T == 5.0


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_hash_is_stable_and_sensitive(tmp_path):
    a = validate(small_config(tmp_path))
    b = validate(small_config(tmp_path))
    c = validate(small_config(tmp_path, simulation={"seed": 6}))
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(a)) == 16
    moved = validate(small_config(tmp_path, output={"directory": str(tmp_path / "elsewhere")}))
    assert config_hash(moved) == config_hash(a)


def test_build_problem(tmp_path):
    p = build_problem(validate(small_config(tmp_path, case1={"epsilon": 0.1, "c1": "1"})))
    assert p.epsilon == 0.1 and p.dimension == 1


def test_writers_are_deterministic(tmp_path):
    stamp = {"config_hash": "abc", "seed": 1}
    write_json(tmp_path / "a.json", {"b": 1.5, "a": [float("nan")]}, stamp)
    body = json.loads((tmp_path / "a.json").read_text())
    assert body == {"a": [None], "b": 1.5, "config_hash": "abc", "seed": 1}
    write_csv(tmp_path / "a.csv", ["t", "v"], [(0.1, 2), (0.2, float("inf"))], stamp)
    text = (tmp_path / "a.csv").read_text()
    assert text.startswith("# config_hash=abc seed=1\n")
    header, rows = read_csv(tmp_path / "a.csv")
    assert header == ["t", "v"] and rows == [["0.1", "2"], ["0.2", "nan"]]


def test_cli_classify_solve_report(tmp_path, capsys):
    path = write(tmp_path, small_config(tmp_path))
    out = tmp_path / "out"
    assert main(["classify", "--config", str(path)]) == 0
    assert "verdict: Simple" in capsys.readouterr().out
    cl = json.loads((out / "classify.json").read_text())
    assert cl["verdict"]["label"] == "Simple"
    assert cl["seed"] == 5 and len(cl["config_hash"]) == 16

    assert main(["solve", "--config", str(path), "--oracle"]) == 0
    sv = json.loads((out / "solve.json").read_text())
    assert sv["estimates"][0]["value"] == pytest.approx(1 / 1.1, abs=0.1)
    assert "oracle" in sv and (out / "oracle_grid.csv").exists()
    header, rows = read_csv(out / "solve.csv")
    assert header[:3] == ["x1", "value", "stderr"] and len(rows) == 1
    meta = json.loads((out / "metadata.json").read_text())
    assert set(meta) == {"classify", "solve"}

    # partial run: no diagnostics yet
    assert main(["report", "--dir", str(out)]) == 0
    summary = (out / "summary.md").read_text()
    assert "| diagnostics | not run |" in summary
    assert (out / "figures" / "solution.png").exists()


def test_cli_diagnose_writes_bundle(tmp_path, capsys):
    path = write(tmp_path, small_config(tmp_path))
    assert main(["diagnose", "--config", str(path)]) == 0
    out = tmp_path / "out"
    for name in ("diagnostics.json", "tv_decay.csv", "exp_moments.csv", "deviation.csv", "lmgf.csv"):
        assert (out / name).exists(), name
    dg = json.loads((out / "diagnostics.json").read_text())
    assert dg["mixing"]["rate"] > 0 and not dg["mixing"]["non_mixing"]
    assert dg["lmgf_mean_comparison"]["agrees"]
    assert "mixing rate" in capsys.readouterr().out


def test_cli_frozen_model_flags_non_mixing(tmp_path):
    cfg = small_config(tmp_path, model={"sigma": [["0"]], "drift": ["0"]}, simulation={"total_time": 50.0})
    path = write(tmp_path, cfg)
    assert main(["diagnose", "--config", str(path)]) == 0
    dg = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert dg["mixing"]["non_mixing"]


def test_cli_exit_codes(tmp_path, capsys):
    cfg = small_config(tmp_path)
    del cfg["model"]["sigma"]
    assert main(["classify", "--config", str(write(tmp_path, cfg))]) == 1
    assert "model.sigma" in capsys.readouterr().err

    refused = write(tmp_path, small_config(tmp_path, potential="-0.1", source="1"), "refused.yaml")
    assert main(["solve", "--config", str(refused)]) == 2
    err = capsys.readouterr().err
    assert "refused" in err and "A4" in err

    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--dir", str(empty)]) == 1
    assert "classify.json" in capsys.readouterr().err

    assert main(["classify"]) == 1
    assert main(["classify", "--config", str(write(tmp_path, small_config(tmp_path))), "--workers", "0"]) == 1


def test_cli_forced_solve_past_refusal(tmp_path):
    cfg = small_config(tmp_path, potential="-0.1", source="1", solve={"T": 2.0})
    path = write(tmp_path, cfg)
    assert main(["solve", "--config", str(path), "--force"]) == 0
    sv = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert sv["verdict"] == "Unsupported"
    assert sv["estimates"][0]["flags"]


def test_explicit_short_T_warns(tmp_path, capsys):
    path = write(tmp_path, small_config(tmp_path, solve={"T": 1.0}))
    assert main(["solve", "--config", str(path)]) == 0
    assert "below the recommended horizon" in capsys.readouterr().out
