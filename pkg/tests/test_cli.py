import csv
import json

import pytest
import yaml

from fracflow.cli import lemma_reports, main
from fracflow.sweep import run_sweep

CFG = """\
domain: {a: -1.0, b: 1.0, M: 32}
kernel: {p: 1.6, s: 0.5}
initial: {kind: bump, width: 0.6}
T: 10.0
stepping: {dt_init: 0.001}
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "bump.yaml").write_text(CFG)
    assert main(["run", str(d / "bump.yaml"), "--out", str(d / "run")]) == 0
    return d / "run"


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_writes_manifest_and_timing(run_dir):
    assert (run_dir / "manifest.json").exists() and (run_dir / "timing.json").exists()
    m = json.loads((run_dir / "manifest.json").read_text())
    assert m["extinction_time"] > 0
    assert "wall_seconds" not in json.dumps(m)


def test_print_config(tmp_path, capsys):
    (tmp_path / "c.yaml").write_text(CFG)
    assert main(["run", str(tmp_path / "c.yaml"), "--print-config"]) == 0
    resolved = yaml.safe_load(capsys.readouterr().out)
    assert resolved["kernel"]["p"] == 1.6 and "newton" in resolved["stepping"]


def test_config_error_exit_code(tmp_path, capsys):
    (tmp_path / "bad.yaml").write_text(CFG.replace("p: 1.6", "p: 2.5"))
    assert main(["run", str(tmp_path / "bad.yaml")]) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("theorem", ["lr", "l1l1", "l1linf", "back", "extinction", "energy"])
def test_verify_verbs(run_dir, capsys, theorem):
    T = json.loads((run_dir / "manifest.json").read_text())["extinction_time"]
    assert main(["verify", "--run", str(run_dir), "--theorem", theorem, "--t", str(0.5 * T)]) == 0
    rep = out_json(capsys)
    assert rep["theorem"] and "gamma_obs" in rep


def test_verify_embedding_needs_compact_support(run_dir, capsys):
    # positive times spread mass over the whole domain
    args = ["verify", "--run", str(run_dir), "--theorem", "embedding", "--rho1", "0.7", "--rho2", "0.95"]
    assert main(args) == 2
    assert "support condition" in capsys.readouterr().err


def test_verify_decay(run_dir, capsys):
    assert main(["verify", "--run", str(run_dir), "--theorem", "decay", "--rho", "0.25"]) == 0
    rep = out_json(capsys)
    assert rep["expected_slope"] == pytest.approx(1 / 0.4)


def test_verify_strict_regime_failure(run_dir, capsys):
    assert main(["verify", "--run", str(run_dir), "--theorem", "l1l1", "--rho", "0.5", "--strict"]) == 1
    assert out_json(capsys)["regime_check"] == "fail"


def test_measure(run_dir, capsys):
    assert main(["measure", "--run", str(run_dir), "--name", "tail", "--rho", "0.3"]) == 0
    assert out_json(capsys)["value"] >= 0


def test_missing_run(tmp_path, capsys):
    assert main(["measure", "--run", str(tmp_path), "--name", "tail"]) == 2
    assert "manifest" in capsys.readouterr().err


def test_oracle_verbs(run_dir, tmp_path, capsys):
    assert main(["oracle", "ode", "--run", str(run_dir)]) == 0
    assert out_json(capsys)["c_obs"] > 0
    assert main(["oracle", "mollify", "--run", str(run_dir), "--h", "0.5", "--save", str(tmp_path / "m")]) == 0
    assert out_json(capsys)["identity_residual"] >= 0
    assert (tmp_path / "m" / "manifest.json").exists()
    assert main(["oracle", "lemmas", "--count", "20"]) == 0
    assert out_json(capsys)["fast_convergence"]["failures"] == 0
    assert main(["oracle", "inequalities", "--p", "1.5", "--q", "2", "--samples", "2000"]) == 0
    assert out_json(capsys)["total_violations"] == 0
    assert main(["oracle", "scale", "--run", str(run_dir), "--k", "4", "--save", str(tmp_path / "k4")]) == 0
    assert out_json(capsys)["time_factor"] == pytest.approx(4 ** 0.4)


def test_check_operator(capsys):
    assert main(["check-operator", "--p", "2", "--M", "32", "64", "--a", "-4", "--b", "4"]) == 0
    rep = out_json(capsys)
    assert len(rep["rel_errors"]) == 2


def test_export_plots_extinct(run_dir, capsys):
    assert main(["export-plots", "--run", str(run_dir)]) == 0
    info = out_json(capsys)
    plots = run_dir / "plots"
    for name in ("sup_vs_t.csv", "mass_vs_t.csv", "profiles.csv", "loglog_mass.csv"):
        assert (plots / name).exists()
    assert info["notes"] == []
    rows = list(csv.reader(open(plots / "sup_vs_t.csv")))
    assert rows[0] == ["t", "sup_u"] and len(rows) > 2


@pytest.mark.parametrize("initial,horizon", [("{kind: zero}", "1.0"), ("{kind: bump, width: 0.6}", "0.01")])
def test_export_plots_zero_and_unfinished(tmp_path, capsys, initial, horizon):
    cfg = CFG.replace("{kind: bump, width: 0.6}", initial).replace("T: 10.0", f"T: {horizon}")
    (tmp_path / "c.yaml").write_text(cfg)
    assert main(["run", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "r")]) == 0
    capsys.readouterr()
    assert main(["export-plots", "--run", str(tmp_path / "r")]) == 0
    notes = out_json(capsys)["notes"]
    assert (tmp_path / "r" / "plots" / "sup_vs_t.csv").exists()
    assert (notes == []) == (initial == "{kind: zero}") or notes


def test_lemma_reports():
    rep = lemma_reports(50, seed=1)
    assert rep["fast_convergence"]["failures"] == 0
    assert rep["interpolation"]["failures"] == 0
    assert rep["interpolation"]["min_slack_over_2_pow_inv_eta"] >= 1 - 1e-9


def test_sweep_scale_invariance(tmp_path, capsys):
    sweep = {
        "base": yaml.safe_load(CFG),
        "axes": {"k": [1.0, 2.0], "initial": [{"kind": "bump", "width": 0.6}, {"kind": "plateau", "width": 0.5}]},
        "verifiers": [{"theorem": "extinction"}, {"theorem": "l1l1", "rho": 0.2, "t": 0.1}],
    }
    rows, summary = run_sweep(sweep, tmp_path / "sw")
    assert len(rows) == 8 and not any("error" in r for r in rows)
    for th in ("extinction", "l1l1"):
        assert summary[th]["scale_invariance_max_dev"] < 0.01
    assert (tmp_path / "sw" / "sweep.csv").exists() and (tmp_path / "sw" / "summary.json").exists()
    (tmp_path / "sw.yaml").write_text(yaml.safe_dump(sweep))
    assert main(["sweep", str(tmp_path / "sw.yaml"), "--out", str(tmp_path / "sw2")]) == 0
    assert out_json(capsys)["rows"] == 8


def test_sweep_rejects_unknown_axis():
    from fracflow.config import ConfigError
    with pytest.raises(ConfigError, match="unknown sweep axes"):
        run_sweep({"base": yaml.safe_load(CFG), "axes": {"colour": [1]}, "verifiers": [{"theorem": "lr"}]})
