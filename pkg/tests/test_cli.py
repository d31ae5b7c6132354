"""CLI: config validation, artifacts, exit codes, worker independence."""

import json
import math

import pytest

from conewalk.cli import main

from conftest import DESK_SIGMA, desk_ensemble, rank_one_ensemble

EXPECTED_NAMES = [
    "audit_comparability",
    "check_reversal_inequalities",
    "check_averaged_llt",
    "check_window_bounds",
    "check_conditioned_window_bounds",
    "check_gnedenko_profile",
    "check_three_halves_rate",
    "check_rayleigh_terminal",
    "check_harmonicity",
]


def _write_config(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def _desk_config(tmp_path, experiments, out="out", **extra):
    cfg = {
        "ensemble": desk_ensemble().to_dict(),
        "experiments": experiments,
        "seed": 3,
        "output_dir": str(tmp_path / out),
        **extra,
    }
    return _write_config(tmp_path, f"{out}.json", cfg)


def test_list_shows_every_experiment(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in EXPECTED_NAMES:
        assert name in out


def test_unknown_top_level_key_is_config_error(tmp_path, capsys):
    cfg = _desk_config(tmp_path, ["audit_comparability"], wordz=3)
    assert main(["run", "--config", cfg]) == 2
    assert "wordz" in capsys.readouterr().err


def test_unknown_experiment_is_config_error(tmp_path, capsys):
    cfg = _desk_config(tmp_path, ["check_nonsense"])
    assert main(["run", "--config", cfg]) == 2
    assert "check_nonsense" in capsys.readouterr().err


def test_missing_config_file(capsys):
    assert main(["run", "--config", "/nonexistent/cfg.json"]) == 2
    assert "not found" in capsys.readouterr().err


def test_invalid_experiment_params_are_config_errors(tmp_path, capsys):
    cfg = _desk_config(
        tmp_path,
        [{"name": "check_reversal_inequalities", "params": {"width": -1.0}}],
    )
    assert main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "check_reversal_inequalities" in err


def test_audit_run_writes_artifacts(tmp_path):
    # ensemble referenced through a file path, not inline
    spec_path = tmp_path / "ensemble.json"
    spec_path.write_text(desk_ensemble().to_json())
    out = tmp_path / "run1"
    cfg = _write_config(tmp_path, "cfg.json", {
        "ensemble": str(spec_path),
        "experiments": [{"name": "audit_comparability", "params": {"words": 400}}],
        "seed": 5,
        "output_dir": str(out),
    })
    assert main(["run", "--config", cfg]) == 0

    verdicts = json.loads((out / "verdicts.json").read_text())
    assert len(verdicts) == 1
    assert verdicts[0]["experiment"] == "audit_comparability"
    assert verdicts[0]["status"] == "pass"

    estimates = json.loads((out / "estimates.json").read_text())
    assert estimates["ensemble"]["family"] == "scaled_uniform"
    assert estimates["assumptions"]["p3_ok"] is True

    lines = (out / "summary.csv").read_text().strip().split("\n")
    assert lines[0] == "experiment,status,statistic,threshold,passed"
    assert lines[1].startswith("audit_comparability,pass,")

    header = (out / "plot_data.csv").read_text().strip().split("\n")[0]
    assert header == "n,b,estimate,std_error,main_term_paper,main_term_rayleigh,residual"

    meta = json.loads((out / "meta.json").read_text())
    assert set(meta) == {"config_hash", "package_version", "elapsed_seconds",
                         "finished_at", "workers"}


def test_seed_override_changes_verdict_hash(tmp_path):
    cfg = _desk_config(
        tmp_path,
        [{"name": "audit_comparability", "params": {"words": 200}}],
        out="seedrun",
    )
    out = tmp_path / "seedrun"
    assert main(["run", "--config", cfg]) == 0
    h1 = json.loads((out / "verdicts.json").read_text())[0]["inputs_hash"]
    assert main(["run", "--config", cfg, "--seed", "4"]) == 0
    h2 = json.loads((out / "verdicts.json").read_text())[0]["inputs_hash"]
    assert h1 != h2


def test_worker_count_leaves_artifacts_byte_identical(tmp_path):
    experiments = [
        {"name": "audit_comparability", "params": {"words": 300}},
        {"name": "check_reversal_inequalities",
         "params": {"horizon": 16, "count": 30_000}},
    ]
    outs = {}
    for workers in (1, 2):
        cfg = _desk_config(tmp_path, experiments, out=f"w{workers}")
        assert main(["run", "--config", cfg, "--workers", str(workers)]) == 0
        outs[workers] = tmp_path / f"w{workers}"
    for name in ("estimates.json", "verdicts.json", "summary.csv", "plot_data.csv"):
        b1 = (outs[1] / name).read_bytes()
        b2 = (outs[2] / name).read_bytes()
        assert b1 == b2, f"{name} differs between worker counts"
    # meta.json is the one artifact allowed to differ (timestamps, workers)
    m1 = json.loads((outs[1] / "meta.json").read_text())
    m2 = json.loads((outs[2] / "meta.json").read_text())
    assert m1["config_hash"] == m2["config_hash"]
    assert m1["workers"] == 1 and m2["workers"] == 2


def test_exit_code_4_on_failed_verdict(tmp_path):
    # deliberately wrong sigma must produce a conclusive failure
    cfg = _desk_config(
        tmp_path,
        [{"name": "check_rayleigh_terminal",
          "params": {"horizon": 256, "survivors": 3000}}],
        out="bad",
        estimates={"sigma": 1.3 * DESK_SIGMA, "sigma_se": 0.0},
    )
    assert main(["run", "--config", cfg]) == 4
    verdicts = json.loads((tmp_path / "bad" / "verdicts.json").read_text())
    assert verdicts[0]["status"] == "fail"


def test_exit_code_3_on_inconclusive_verdict(tmp_path):
    cfg = _desk_config(
        tmp_path,
        [{"name": "check_rayleigh_terminal",
          "params": {"horizon": 512, "survivors": 100_000, "max_paths": 20_000}}],
        out="thin",
        estimates={"sigma": DESK_SIGMA, "sigma_se": 0.0},
    )
    assert main(["run", "--config", cfg]) == 3


def test_calibration_block_runs_and_is_recorded(tmp_path):
    drifted = rank_one_ensemble().with_shift(-math.log(2.0) + 0.2)
    out = tmp_path / "cal"
    cfg = _write_config(tmp_path, "cal.json", {
        "ensemble": drifted.to_dict(),
        "experiments": [{"name": "audit_comparability", "params": {"words": 200}}],
        "seed": 1,
        "output_dir": str(out),
        "calibration": {"enabled": True, "tol": 4e-3, "budget": 2_000_000},
    })
    assert main(["run", "--config", cfg]) == 0
    estimates = json.loads((out / "estimates.json").read_text())
    assert estimates["calibration"]["converged"] is True
    assert estimates["ensemble"]["centering_shift"] == pytest.approx(-math.log(2.0), abs=0.01)
