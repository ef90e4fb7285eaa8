import json

import numpy as np
import pytest

from uboundary import cli
from uboundary.dataset import Dataset, load_csv, save_csv


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    N = 3000
    s = rng.uniform(size=N)
    u = rng.normal(size=N)
    y = (rng.uniform(size=N) < s**2).astype(int)
    path = tmp_path / "data.csv"
    save_csv(Dataset(s, u, y), path)
    return path


def run(*argv, env=None):
    return cli.run([str(a) for a in argv], env=env or {})


def test_fit_writes_feasible_boundary(tmp_path, data_csv, capsys):
    out = tmp_path / "b.json"
    code = run("fit", "--algo", "ew-dpmt", "--binning", "equi-weight", "--k", 3, "--l", 50,
               "--sigma", 0.9, "--input", data_csv, "--output", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["precision_fit"] >= 0.9 and doc["feasible"]
    assert doc["partitioner"]["K"] == 3
    assert "hold-out" in capsys.readouterr().out


def test_eval_on_fitting_set_matches_fit(tmp_path, data_csv, capsys):
    out = tmp_path / "b.json"
    assert run("fit", "--input", data_csv, "--output", out, "--sigma", 0.8, "--l", 40, "--algo", "mist") == 0
    capsys.readouterr()
    assert run("eval", "--boundary", out, "--input", data_csv) == 0
    metrics = json.loads(capsys.readouterr().out)
    doc = json.loads(out.read_text())
    assert metrics["precision"] == doc["precision_fit"]
    assert metrics["recall"] == doc["recall_fit"]
    assert metrics["tp"] == doc["tp"]


def test_infeasible_sigma_exits_2(tmp_path, capsys):
    # every bin mixes labels, so precision 1 is out of reach
    d = Dataset(np.linspace(0, 1, 40), np.zeros(40), np.tile([0, 1], 20))
    save_csv(d, tmp_path / "mixed.csv")
    code = run("fit", "--input", tmp_path / "mixed.csv", "--output", tmp_path / "b.json",
               "--sigma", 1.0, "--k", 1, "--l", 4)
    assert code == 2
    assert "infeasible" in capsys.readouterr().err
    assert not (tmp_path / "b.json").exists()


@pytest.mark.parametrize(
    "extra",
    [
        ["--algo", "lp"],
        ["--algo", "ew-dpmt", "--binning", "equi-span"],
        ["--binning", "quantile"],
        ["--sigma", "0"],
        ["--sigma", "1.5"],
        ["--k", "0"],
    ],
)
def test_input_errors_exit_1(tmp_path, data_csv, extra):
    args = ["fit", "--input", data_csv, "--output", tmp_path / "b.json", "--sigma", 0.8, "--l", 20]
    assert run(*args, *extra) == 1


def test_missing_file_and_bad_flag(tmp_path):
    assert run("fit", "--input", tmp_path / "nope.csv", "--output", tmp_path / "b.json", "--sigma", 0.5) == 1
    assert run("fit", "--bogus") == 1
    assert run() == 1


def test_dump_config_and_env_override(capsys):
    assert run("--dump-config", "sweep", "--input", "a.csv", "--output", "pr.csv",
               env={"UBOUNDARY_K": "4", "UBOUNDARY_SIGMAS": "0.6,0.9"}) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["command"] == "sweep"
    assert (cfg["k"], cfg["l"], cfg["sigmas"]) == (4, 500, [0.6, 0.9])
    # flags beat the environment
    run("--dump-config", "sweep", "--input", "a", "--output", "b", "--k", "2", env={"UBOUNDARY_K": "4"})
    assert json.loads(capsys.readouterr().out)["k"] == 2


def test_env_supplies_required_flag(tmp_path, data_csv, capsys):
    env = {"UBOUNDARY_INPUT": str(data_csv), "UBOUNDARY_SIGMA": "0.7"}
    assert run("fit", "--output", tmp_path / "b.json", "--l", 20, env=env) == 0


def test_sweep_bias_calibrate_outputs(tmp_path, data_csv):
    assert run("sweep", "--input", data_csv, "--output", tmp_path / "pr.csv", "--l", 30,
               "--sigmas", "0.5,0.7,0.9") == 0
    lines = (tmp_path / "pr.csv").read_text().splitlines()
    assert lines[0] == "sigma,selected_n,tp,precision,recall,feasible,thresholds" and len(lines) == 4
    recalls = [float(line.split(",")[4]) for line in lines[1:]]
    assert recalls == sorted(recalls, reverse=True)

    assert run("bias", "--output", tmp_path / "bias.csv", "--gammas", "0.5,2", "--points", 5) == 0
    lines = (tmp_path / "bias.csv").read_text().splitlines()
    assert lines[0] == "s,gamma,tau,expected_positivity" and len(lines) == 11

    half = tmp_path / "hold.csv"
    rest = tmp_path / "rest.csv"
    assert run("split", "--input", data_csv, "--out-hold", half, "--out-test", rest, "--seed", 3) == 0
    assert load_csv(half).n_total + load_csv(rest).n_total == 3000
    assert run("calibrate", "--hold", half, "--test", rest, "--output", tmp_path / "cal.csv") == 0
    lines = (tmp_path / "cal.csv").read_text().splitlines()
    assert lines[0] == "j,ece_mist,ece_ist,cum_ece_mist,cum_ece_ist,count" and len(lines) == 11


def test_simulate_and_bin(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--out-dir", out, "--n-regions", 500, "--seed", 2) == 0
    assert sorted(p.name for p in out.iterdir()) == ["test.csv", "train.csv", "truth.csv"]
    assert run("bin", "--input", out / "test.csv", "--output", tmp_path / "g.json", "--l", 10) == 0
    grid = json.loads((tmp_path / "g.json").read_text())
    assert np.array(grid["n"]).sum() == load_csv(out / "test.csv").n_total


def test_prune_flag(tmp_path, data_csv):
    out = tmp_path / "b.json"
    assert run("fit", "--input", data_csv, "--output", out, "--sigma", 0.8, "--l", 30,
               "--algo", "gmt", "--prune") == 0
    assert json.loads(out.read_text())["precision_fit"] >= 0.8
