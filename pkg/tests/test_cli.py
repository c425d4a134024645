import json
import shutil
import subprocess

import numpy as np
import pytest

from vaebounds import cli, io


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_and_fit(tmp_path, capsys):
    data = tmp_path / "data.csv"
    code, out, err = run(capsys, "gen", "--nx", "16", "--nz", "3", "--sigma", "0.1", "--n", "2000",
                         "--seed", "7", "--out", str(data))
    assert code == 0 and err == ""
    assert io.read_csv(data).points.shape == (2000, 16)
    truth = io.load_model(tmp_path / "data.model.json")
    assert truth.n_z == 3 and truth.sigma == 0.1
    assert json.loads(out.splitlines()[0])["seed"] == 7

    model = tmp_path / "fit.bin"
    code, out, _ = run(capsys, "fit-ppca", "--data", str(data), "--nz", "3", "--out", str(model))
    assert code == 0
    fitted = io.load_model(model)
    assert fitted.sigma == pytest.approx(0.1, rel=0.05)
    np.testing.assert_allclose(np.sort(np.linalg.norm(fitted.c_r, axis=0)), [0.25, 0.5, 1.0], rtol=0.1)


def test_seed_is_mandatory(capsys):
    code, _, err = run(capsys, "gen", "--nx", "4", "--nz", "1", "--sigma", "0.1", "--n", "5", "--out", "x.csv")
    assert code == 2 and "--seed" in err
    code, _, err = run(capsys, "train", "--epochs", "1")
    assert code == 2 and "--seed" in err


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "explode")[0] == 2
    assert run(capsys, "check", "--bogus")[0] == 2
    code, out, err = run(capsys, "fit-ppca", "--data", str(tmp_path / "missing.csv"), "--nz", "1", "--out", "m.json")
    assert code == 2 and "missing.csv" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert run(capsys, "fit-ppca", "--data", str(bad), "--nz", "1", "--out", "m.json")[0] == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no equals sign here\n")
    assert run(capsys, "train", "--config", str(cfg), "--seed", "1")[0] == 2
    cfg.write_text("epochs = -3\n")
    assert run(capsys, "train", "--config", str(cfg), "--seed", "1")[0] == 2


def test_check_passes(capsys):
    code, out, _ = run(capsys, "check", "--trials", "20", "--seed", "1")
    assert code == 0
    assert "total:" in out and "0 failed" in out.splitlines()[-1]


def test_check_failure_exit_code(capsys, monkeypatch):
    from vaebounds import checks

    monkeypatch.setattr(checks, "run_all", lambda t, s: [checks.SuiteResult("x", 1, 2)])
    code, out, err = run(capsys, "check", "--trials", "3", "--seed", "0")
    assert code == 3 and "failed" in err


def test_train_prints_resolved_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_x = 5\nn_z = 2\nn_points = 100\nepochs = 2\nhidden = 4\neval_mc_samples = 8\nlr = 0.1\n")
    metrics = tmp_path / "m.jsonl"
    code, out, err = run(capsys, "train", "--config", str(cfg), "--seed", "3", "--lr", "0.002",
                         "--objective", "vae_c", "--metrics", str(metrics))
    assert code == 0, err
    resolved = json.loads(out.splitlines()[0])["config"]
    assert resolved["lr"] == 0.002 and resolved["n_x"] == 5 and resolved["objective"] == "vae_c"
    assert resolved["seed"] == 3
    assert len(metrics.read_text().splitlines()) == 2


def test_bracket_command(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    metrics = tmp_path / "b.jsonl"
    cfg.write_text(f"n_x = 5\nn_z = 2\nn_points = 100\nepochs = 2\nhidden =\neval_mc_samples = 8\n"
                   f"metrics_path = {metrics}\n")
    code, out, _ = run(capsys, "bracket", "--config", str(cfg))
    assert code == 0
    final = json.loads(out.splitlines()[-1])
    assert set(final) == {"width", "trend", "encoder_gap", "combined_se"}
    kinds = [json.loads(line)["objective"] for line in metrics.read_text().splitlines()]
    assert sorted(set(kinds)) == ["elbo", "eubo"]


@pytest.mark.skipif(shutil.which("vaebounds") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["vaebounds", "check", "--trials", "5", "--seed", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "total:" in proc.stdout
