# test_cli.py
import json
from unittest.mock import patch

import pytest

from construction_service.gf2matrix import ParityCheckMatrix, read_alist, write_alist
from experiment_service.main import RuntimeSettings, main
from simulation_service.montecarlo import BlerCurve, make_point, read_curve_csv, write_curve_csv


@pytest.fixture(autouse=True)
def mock_logging(monkeypatch):
    monkeypatch.delenv("LDPC_THREADS", raising=False)
    with patch("common_utils.logger.client.LoggerClient._send_log", return_value=True):
        yield


def write_curve(path, code_id, offset=0.0):
    points = [make_point(s + offset, 1000, e, e, 64) for s, e in [(1.0, 500), (2.0, 50), (3.0, 5)]]
    write_curve_csv(BlerCurve(code_id=code_id, points=points), path)
    return path


def test_presets(capsys):
    assert main(["presets"]) == 0
    names = capsys.readouterr().out.split()
    assert "unconstrained-64" in names
    assert "set4-96-b4" in names


def test_bad_flag_exits_2():
    assert main(["simulate", "--no-such-flag"]) == 2


def test_unknown_preset_exits_2(tmp_path, capsys):
    assert main(["construct", "--method", "peg", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_construct_from_config(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({
        "name": "cli", "code": {"n": 32, "k": 16, "target_col_weight": 3},
        "methods": ["peg"], "snr_grid": [0, 1],
    }))
    out = tmp_path / "out"
    assert main(["construct", "--method", "peg", "--config", str(config), "--seed", "4", "--out", str(out)]) == 0
    alist = out / "peg-4.alist"
    assert capsys.readouterr().out.strip() == str(alist)
    assert read_alist(alist).shape == (16, 32)
    record = json.loads((out / "metrics.json").read_text())
    assert record["metrics"]["n"] == 32
    assert json.loads((out / "manifest.json").read_text())["seeds"] == [4]


def test_metrics_command(tmp_path, capsys):
    path = tmp_path / "h.alist"
    write_alist(ParityCheckMatrix.from_dense([[1, 1], [1, 1]]), path)
    assert main(["metrics", "--in", str(path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["c4"] == 1
    assert metrics["girth"] == 4


def test_metrics_bad_alist(tmp_path, capsys):
    path = tmp_path / "bad.alist"
    path.write_text("4\n")
    assert main(["metrics", "--in", str(path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(["metrics", "--in", str(tmp_path / "absent.alist")]) == 2


def test_simulate_command(tmp_path):
    path = tmp_path / "code.alist"
    write_alist(ParityCheckMatrix.from_dense([[1, 1, 0, 1, 0, 0], [0, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1]]), path)
    out = tmp_path / "curves" / "code.csv"
    assert main(["simulate", "--in", str(path), "--snr-grid", "0:2:1", "--trials", "20",
                 "--seed", "3", "--out", str(out), "--threads", "1"]) == 0
    curve = read_curve_csv(out)
    assert curve.code_id == "code"
    assert [p.snr_db for p in curve.points] == [0.0, 1.0, 2.0]
    assert (out.parent / "manifest.json").exists()


def test_compare_identical_curves(tmp_path, capsys):
    a = write_curve(tmp_path / "a.csv", "a")
    assert main(["compare", "--a", str(a), "--b", str(a), "--target-bler", "0.01"]) == 0
    assert "+0.00 dB" in capsys.readouterr().out


def test_compare_shifted_curves(tmp_path, capsys):
    a = write_curve(tmp_path / "a.csv", "hybrid")
    b = write_curve(tmp_path / "b.csv", "peg", offset=0.5)
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 0
    out = capsys.readouterr().out
    assert "Gain (hybrid over peg): +0.50 dB" in out


def test_compare_not_bracketed_exits_3(tmp_path, capsys):
    a = write_curve(tmp_path / "a.csv", "a")
    assert main(["compare", "--a", str(a), "--b", str(a), "--target-bler", "0.0001"]) == 3
    assert "not bracketed" in capsys.readouterr().err


def test_invalid_thread_settings(tmp_path, monkeypatch):
    path = tmp_path / "h.alist"
    write_alist(ParityCheckMatrix.identity(3), path)
    assert main(["simulate", "--in", str(path), "--threads", "0", "--snr-grid", "1"]) == 2
    monkeypatch.setenv("LDPC_THREADS", "many")
    assert main(["presets"]) == 2


def test_metrics_trap42_and_block_size(tmp_path, capsys):
    path = tmp_path / "trap.alist"
    write_alist(ParityCheckMatrix.from_dense([
        [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 0], [0, 0, 0, 1],
    ]), path)
    assert main(["metrics", "--in", str(path), "--trap42"]) == 0
    assert json.loads(capsys.readouterr().out)["trap_42"] == 1

    circulant = tmp_path / "circulant.alist"
    write_alist(ParityCheckMatrix.from_dense([
        [1, 0, 0, 1], [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1],
    ]), circulant)
    assert main(["metrics", "--in", str(circulant), "--block-size", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["block_deviation"] == 0


def test_construct_is_reproducible(tmp_path):
    for run in ("a", "b"):
        assert main(["construct", "--method", "random", "--preset", "unconstrained-64",
                     "--seed", "7", "--out", str(tmp_path / run)]) == 0
    first = (tmp_path / "a" / "random-7.alist").read_bytes()
    assert first == (tmp_path / "b" / "random-7.alist").read_bytes()


def test_pareto_command(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({
        "name": "pareto", "code": {"n": 16, "k": 8, "target_col_weight": 3, "block_size": 4},
        "weights": {"alpha_w": 50, "alpha_b": 200, "block_size": 4},
        "anneal": {"t_max": 60, "restarts": 2, "refine_budget": 10, "rank_repair_budget": 40},
        "methods": ["hybrid", "peg", "block_peg"], "snr_grid": [0, 1],
    }))
    out = tmp_path / "pareto"
    assert main(["pareto", "--config", str(config), "--seed", "5", "--out", str(out), "--threads", "1"]) == 0
    csv_path = out / "pareto.csv"
    assert capsys.readouterr().out.strip() == str(csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "profile,c4,c6,block_deviation,alist_path"
    assert [line.split(",")[0] for line in lines[1:]] == [
        "cycle-dominant", "balanced", "structure-dominant", "peg", "block_peg",
    ]
    assert (out / "block_peg-5.alist").exists()


def test_runtime_settings_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LDPC_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("LDPC_THREADS", "3")
    settings = RuntimeSettings()
    assert settings.output_dir == tmp_path / "results"
    assert settings.threads == 3
    # logging is configured by LoggerClient from the environment
    assert vars(settings).keys() == {"output_dir", "threads"}
