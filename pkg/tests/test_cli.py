import json

import pandas as pd
from typer.testing import CliRunner

from stochastic_bidomain.cli import app
from stochastic_bidomain.quality import LEDGER_COLUMNS

runner = CliRunner()

SMALL_TOML = """
[grid]
extent = 1.0
nodes_per_axis = 9

[noise]
modes = 4

[sim]
dt = 0.01
T = 0.5
epsilon = 0.1

[experiment]
replicas = 40
seed = 1
epsilons = [0.2, 0.1]
"""


def _config(tmp_path, extra="", base=SMALL_TOML):
    p = tmp_path / "run.toml"
    p.write_text(base + extra, encoding="utf-8")
    return p


def _invoke(args):
    return runner.invoke(app, [str(a) for a in args])


def _run_dirs(out):
    return sorted(p for p in out.iterdir() if p.is_dir())


def _single_run(out):
    (run_dir,) = _run_dirs(out)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    report = json.loads((run_dir / "report.json").read_text())
    return run_dir, manifest, report


def test_operator_info_writes_report_and_manifest(tmp_path):
    out = tmp_path / "runs"
    result = _invoke(["operator-info", _config(tmp_path), "--eigenvalues", "3", "--out-dir", out])

    assert result.exit_code == 0, result.output
    run_dir, manifest, report = _single_run(out)
    assert run_dir.name.endswith("-seed1")
    assert len(report["operator"]["eigenvalues"]) == 3
    assert report["operator"]["alpha"] > 0
    assert manifest["exit_code"] == 0
    assert manifest["outputs"] == ["report.json"]
    assert manifest["command"] == ["operator-info", "--eigenvalues=3"]


def test_operator_info_with_noise_reports_summability(tmp_path):
    out = tmp_path / "runs"
    cfg = _config(tmp_path, base=SMALL_TOML.replace("modes = 4", "modes = 8"))
    result = _invoke(["operator-info", cfg, "--noise", "--out-dir", out])

    assert result.exit_code == 0, result.output
    _, _, report = _single_run(out)
    assert report["noise"]["n_modes"] == 8
    assert report["summability"]["verdict_half"] == "converges"
    assert report["summability"]["verdict_sq"] == "converges"


def test_operator_info_with_few_noise_modes_is_inconclusive(tmp_path):
    out = tmp_path / "runs"
    result = _invoke(["operator-info", _config(tmp_path), "--noise", "--out-dir", out])

    assert result.exit_code == 0, result.output
    _, _, report = _single_run(out)
    assert report["noise"]["n_modes"] == 4
    assert report["summability"]["verdict_half"] == "inconclusive"
    assert report["summability"]["slope_half"] is None


def test_check_model_passes_on_unit_interval(tmp_path):
    out = tmp_path / "runs"
    result = _invoke(["check-model", _config(tmp_path), "--out-dir", out])

    assert result.exit_code == 0, result.output
    _, _, report = _single_run(out)
    assert report["certified"] is True
    assert report["coefficient_condition"]["satisfied"] is True


def test_check_model_flags_unmet_coefficient_condition(tmp_path):
    # alpha / C_p is about 1/4 on [0, pi], below the FitzHugh-Nagumo requirement
    base = "[grid]\nnodes_per_axis = 33\n"
    out = tmp_path / "runs"
    result = _invoke(["check-model", _config(tmp_path, base=base), "--out-dir", out])

    assert result.exit_code == 2
    _, manifest, report = _single_run(out)
    assert report["coefficient_condition"]["satisfied"] is False
    assert manifest["exit_code"] == 2


def test_simulate_writes_ledger(tmp_path):
    out = tmp_path / "runs"
    result = _invoke(["simulate", _config(tmp_path), "--seed", "4", "--out-dir", out])

    assert result.exit_code == 0, result.output
    run_dir, manifest, report = _single_run(out)
    ledger = pd.read_csv(run_dir / "ledger.csv")
    assert list(ledger.columns) == LEDGER_COLUMNS
    assert len(ledger) == report["records"] == 51
    assert manifest["seed"] == 4
    assert manifest["outputs"] == ["ledger.csv", "report.json"]


def test_simulate_blow_up_keeps_partial_ledger(tmp_path):
    base = (
        "[grid]\nextent = 1.0\nnodes_per_axis = 5\n[noise]\nmodes = 4\n"
        "[sim]\ndt = 0.01\nT = 1.0\nu0 = 100.0\n"
    )
    out = tmp_path / "runs"
    result = _invoke(["simulate", _config(tmp_path, base=base), "--out-dir", out])

    assert result.exit_code == 1
    run_dir, manifest, report = _single_run(out)
    ledger = pd.read_csv(run_dir / "ledger.csv")
    bad = report["blow_up"]["first_bad_row"]
    assert report["blow_up"]["time"] > 0
    assert list(ledger.columns) == [*LEDGER_COLUMNS, "flag_non_finite", "flag_blowup"]
    assert bad == len(ledger) - 1 >= 1
    assert (ledger["flag_non_finite"] | ledger["flag_blowup"]).tolist() == [False] * bad + [True]
    assert report["blow_up"]["last_row"]["t"] == ledger["t"].iloc[bad - 1]
    assert manifest["exit_code"] == 1


def test_small_noise_experiment_is_thread_count_independent(tmp_path):
    cfg = _config(tmp_path)
    one, many = tmp_path / "one", tmp_path / "many"

    r1 = _invoke(["experiment", "small-noise", cfg, "--threads", "1", "--out-dir", one])
    r2 = _invoke(["experiment", "small-noise", cfg, "--threads", "3", "--out-dir", many])

    assert r1.exit_code == 0, r1.output
    assert r2.exit_code == 0, r2.output
    dir1, _, report = _single_run(one)
    dir2, _, _ = _single_run(many)
    assert report["verdict"] == "within_bound"
    assert (dir1 / "report.json").read_bytes() == (dir2 / "report.json").read_bytes()
    assert (dir1 / "replicas.csv").read_bytes() == (dir2 / "replicas.csv").read_bytes()


def test_tail_experiment_with_uninformative_bound_exits_inconclusive(tmp_path):
    cfg = _config(tmp_path, extra="r = 3.0\n")
    out = tmp_path / "runs"
    result = _invoke(["experiment", "tail", cfg, "--replicas", "4", "--out-dir", out])

    assert result.exit_code == 3
    _, manifest, report = _single_run(out)
    assert report["verdict"] == "inconclusive"
    assert manifest["config"]["experiment"]["replicas"] == 4


def test_bad_config_exits_with_error(tmp_path):
    cfg = _config(tmp_path, base="[sim]\nepsilonn = 0.1\n")
    result = _invoke(["simulate", cfg, "--out-dir", tmp_path / "runs"])

    assert result.exit_code == 1
    assert "Unknown key: sim.epsilonn" in result.output
    assert not (tmp_path / "runs").exists()


def test_missing_config_exits_with_error(tmp_path):
    result = _invoke(["operator-info", tmp_path / "missing.toml", "--out-dir", tmp_path / "runs"])

    assert result.exit_code == 1
    assert "Config not found" in result.output


def test_rerun_reproduces_report(tmp_path):
    first_out, second_out = tmp_path / "first", tmp_path / "second"
    result = _invoke(["operator-info", _config(tmp_path), "--noise", "--out-dir", first_out])
    assert result.exit_code == 0, result.output
    first_dir, manifest, _ = _single_run(first_out)

    rerun = _invoke(["rerun", first_dir / "manifest.json", "--out-dir", second_out])

    assert rerun.exit_code == 0, rerun.output
    second_dir, second_manifest, _ = _single_run(second_out)
    assert (first_dir / "report.json").read_bytes() == (second_dir / "report.json").read_bytes()
    assert second_manifest["command"] == manifest["command"]
    assert second_manifest["operator_fingerprint"] == manifest["operator_fingerprint"]


def test_rerun_rejects_missing_manifest(tmp_path):
    result = _invoke(["rerun", tmp_path / "nowhere", "--out-dir", tmp_path / "runs"])

    assert result.exit_code == 1
    assert "Manifest not found" in result.output
