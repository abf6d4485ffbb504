"""End-to-end CLI runs in subprocesses: all subcommands plus exit codes."""

import json
import os
import subprocess
import sys

import pytest

from slicekit.config import ExperimentConfig
from slicekit.schemas import validate


def run_cli(*args, env_extra=None, cwd=None):
    env = os.environ.copy()
    env.pop("SLICEKIT_OUT_DIR", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "slicekit", *map(str, args)],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared dir with generated data and one trained checkpoint."""
    d = tmp_path_factory.mktemp("cli")
    r = run_cli("gen-data", "--dataset", "spirals", "--n-per-class", "24",
                "--seed", "0", "--out", d)
    assert r.returncode == 0, r.stderr
    cfg = ExperimentConfig(name="smoke", seed=0, n_per_class=24, width=32,
                           groups=4, depth=2, epochs=3, batch_size=16,
                           learning_rate=0.1, scheme="R-min-max")
    cfg.save(d / "exp.ini")
    r = run_cli("train", "--config", d / "exp.ini",
                "--data", d / "spirals.csv", "--out", d)
    assert r.returncode == 0, r.stderr
    return d


def test_gen_data_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        r = run_cli("gen-data", "--dataset", "spirals", "--n-per-class", "8",
                    "--seed", "5", "--out", tmp_path / sub)
        assert r.returncode == 0, r.stderr
        assert str(tmp_path / sub / "spirals.csv") in r.stdout
    assert (tmp_path / "a" / "spirals.csv").read_bytes() == \
           (tmp_path / "b" / "spirals.csv").read_bytes()


def test_gen_data_chartext(tmp_path):
    r = run_cli("gen-data", "--dataset", "chartext", "--length", "256",
                "--period", "4", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    text = (tmp_path / "chartext.txt").read_text()
    assert len(text) == 256
    assert text == (text[:4] * 65)[:256]


def test_out_dir_env_var(tmp_path):
    env_dir = tmp_path / "from-env"
    r = run_cli("gen-data", "--dataset", "spirals", "--n-per-class", "4",
                env_extra={"SLICEKIT_OUT_DIR": str(env_dir)})
    assert r.returncode == 0, r.stderr
    assert (env_dir / "spirals.csv").exists()
    # an explicit --out wins over the environment
    flag_dir = tmp_path / "from-flag"
    r = run_cli("gen-data", "--dataset", "spirals", "--n-per-class", "4",
                "--out", flag_dir, env_extra={"SLICEKIT_OUT_DIR": str(env_dir)})
    assert r.returncode == 0, r.stderr
    assert (flag_dir / "spirals.csv").exists()


def test_train_outputs(workdir):
    out = workdir / "smoke"
    assert (out / "checkpoint" / "manifest.json").exists()
    assert (out / "checkpoint" / "params.bin").exists()
    assert (out / "config.ini").exists()
    history = (out / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,rate,loss,metric,metric_name,wall_time_s"
    # 3 epochs x 4 rates of eval rows
    assert len(history) == 1 + 3 * 4


def test_train_resume(workdir, tmp_path):
    r = run_cli("train", "--config", workdir / "exp.ini",
                "--data", workdir / "spirals.csv", "--out", tmp_path,
                "--resume", workdir / "smoke" / "checkpoint")
    assert r.returncode == 0, r.stderr
    assert "resumed from" in r.stdout


def test_eval_and_boundary_note(workdir):
    r = run_cli("eval", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv", "--rate", "0.5")
    assert r.returncode == 0, r.stderr
    assert r.stdout.startswith("rate 0.5:")
    assert "off-boundary" not in r.stdout
    r = run_cli("eval", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv", "--rate", "0.6")
    assert r.returncode == 0, r.stderr
    assert "off-boundary" in r.stdout
    assert "width 16" in r.stdout  # 0.6 * 32 rounds down to the 0.5 boundary


def test_sweep_writes_validated_json(workdir, tmp_path):
    r = run_cli("sweep", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "sweep.json").read_text())
    validate(report, "sweep")
    assert [row["rate"] for row in report["rows"]] == [0.25, 0.5, 0.75, 1.0]
    assert report["rows"][-1]["flops_ratio"] == 1.0
    csv = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(csv) == 5


def test_cost_vgg13_quadratic(tmp_path):
    j = tmp_path / "cost.json"
    r = run_cli("cost", "--model", "vgg13", "--rate", "0.25", "--json", j)
    assert r.returncode == 0, r.stderr
    report = json.loads(j.read_text())
    validate(report, "cost_report")
    assert report["full_params"] == 9416010
    assert report["full_flops"] == 1020990464
    assert abs(report["flops_ratio"] - 0.0625) < 0.002


def test_simulate_bundled_trace(tmp_path):
    r = run_cli("simulate", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "simulate.json").read_text())
    validate(summary, "simulate_summary")
    assert summary["total_queries"] == 2560
    assert summary["violations"] == 0
    assert summary["rates_used"] == [0.25, 1.0]
    assert (tmp_path / "simulate_batches.csv").exists()


def test_simulate_custom_trace(tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text("# three arrivals\n0.1\n0.2\n0.3\n")
    r = run_cli("simulate", "--trace", trace, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "simulate.json").read_text())
    assert summary["total_queries"] == 3
    assert summary["batches"] == 1


def test_cascade_report(workdir, tmp_path):
    r = run_cli("cascade", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "cascade.json").read_text())
    validate(report, "cascade_report")
    assert len(report["stages"]) == 4
    recalls = [s["aggregate_recall"] for s in report["stages"]]
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert len(report["inclusion"]) == 6  # all ordered rate pairs


def test_widen_report(workdir, tmp_path):
    r = run_cli("widen", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv",
                "--r-a", "0.25", "--r-b", "1.0", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "widen.json").read_text())
    validate(report, "widen_report")
    assert report["max_abs_dev"] <= 1e-10
    assert report["agreement"] == 1.0
    assert report["flops_update"] < report["flops_direct"]


def test_exit_code_2_on_bad_config(workdir, tmp_path):
    r = run_cli("eval", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", workdir / "spirals.csv", "--rate", "1.5")
    assert r.returncode == 2
    assert "error:" in r.stderr
    r = run_cli("cost", "--model", "resnet")
    assert r.returncode == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nwidht = 3\n")
    r = run_cli("train", "--config", bad, "--data", workdir / "spirals.csv")
    assert r.returncode == 2
    # argparse usage errors share the code
    r = run_cli("eval")
    assert r.returncode == 2


def test_exit_code_3_on_missing_data(workdir, tmp_path):
    r = run_cli("eval", "--checkpoint", workdir / "smoke" / "checkpoint",
                "--data", tmp_path / "nope.csv", "--rate", "0.5")
    assert r.returncode == 3
    r = run_cli("simulate", "--trace", tmp_path / "nope.csv", "--out", tmp_path)
    assert r.returncode == 3


def test_exit_code_4_on_diverging_training(workdir, tmp_path):
    cfg = ExperimentConfig(name="blowup", seed=0, n_per_class=24, width=32,
                           groups=4, epochs=2, batch_size=4096,
                           learning_rate=1e300, scheme="Static",
                           rates=(1.0,))
    cfg.save(tmp_path / "blowup.ini")
    r = run_cli("train", "--config", tmp_path / "blowup.ini",
                "--data", workdir / "spirals.csv", "--out", tmp_path)
    assert r.returncode == 4
    assert "error:" in r.stderr
