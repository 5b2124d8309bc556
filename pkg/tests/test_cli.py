#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import json

import pytest

from main import EXIT_OK, EXIT_VALIDATION, main

REGULARITY_KEYS = {"preset", "order", "alpha_C", "alpha_L2", "k", "depth"}


def run_json(capsys, tmp_path, *argv):
    code = main(["--json", "--quiet", "--output-dir", str(tmp_path), *argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == EXIT_OK else None)


def test_mask_command(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "mask", "--preset", "square", "--order", "0")
    assert code == EXIT_OK
    assert summary["command"] == "mask"
    assert summary["count"] == 2
    assert [c for _, c in summary["coeffs"]] == ["1", "1"]
    assert summary["sum_rules"] == 0
    saved = json.loads((tmp_path / "mask_square-B0.json").read_text(encoding="utf-8"))
    assert saved["matrix"] == [[0, -2], [1, 0]]


def test_bear_style_names(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "mask", "--preset", "bear-3")
    assert code == EXIT_OK
    assert summary["name"] == "bear-B2"
    assert summary["count"] == 4


def test_tails_single_value(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "tails", "--q", "0.7", "--m", "22")
    assert code == EXIT_OK
    assert summary["H2"] == pytest.approx(0.00375, abs=2e-5)


def test_tails_table_file(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "tails", "--q", "0.85")
    assert code == EXIT_OK
    assert [row[0] for row in summary["table"]] == [1, 10, 20, 30, 40, 50, 60]
    assert (tmp_path / "tails_q0.85.csv").exists()


def test_values_command(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "values", "--preset", "bear", "--order", "1", "--depth", "4")
    assert code == EXIT_OK
    assert summary["points"] > 0
    assert summary["partition_of_unity"] <= 1e-9
    assert (tmp_path / "values_bear-B1_q4.csv").exists()


def test_output_is_deterministic(capsys, tmp_path):
    argv = ["values", "--preset", "dragon", "--order", "2", "--depth", "5"]
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["--json", "--quiet", "--output-dir", str(first), *argv]) == EXIT_OK
    out1 = capsys.readouterr().out
    assert main(["--json", "--quiet", "--output-dir", str(second), *argv]) == EXIT_OK
    out2 = capsys.readouterr().out
    assert out1.replace(str(first), "") == out2.replace(str(second), "")
    name = "values_dragon-B2_q5.csv"
    assert (first / name).read_bytes() == (second / name).read_bytes()


def test_tile_command(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "tile", "--preset", "bear", "--depth", "10", "--grid", "32")
    assert code == EXIT_OK
    assert summary["points"] == 1024
    assert summary["center"] == pytest.approx([-0.25, -0.25])
    assert (tmp_path / "tile_bear_p10.pgm").exists()


def test_subdivide_torus(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "subdivide", "--preset", "bear-4", "--iters", "1",
                             "--boundary", "periodic")
    assert code == EXIT_OK
    assert summary["vertices"] == 512
    assert summary["faces"] == 512
    assert summary["outputs"][0].endswith(".obj")


def test_subdivide_control_net_file(capsys, tmp_path):
    net = tmp_path / "line.csv"
    net.write_text("j1,x\n0,1\n1,2\n2,4\n", encoding="utf-8")
    code, summary = run_json(capsys, tmp_path, "subdivide", "--preset", "unit1d", "--order", "1",
                             "--iters", "2", "--input", str(net), "--report", "--depth", "4")
    assert code == EXIT_OK
    assert summary["input_points"] == 3
    assert summary["outputs"][0].endswith(".csv")
    assert summary["report"]["converges_in_C"] == 0


def test_wavelet_command_1d(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "wavelet", "--preset", "unit1d", "--order", "1",
                             "--grid", "1024", "--q", "0.3", "--budget", "0.001", "--norm", "l1",
                             "--raster", "5")
    assert code == EXIT_OK
    assert summary["sign_rule"] == "(-1)^(k1)"
    assert max(summary["qmf"]) <= 1e-9
    assert summary["truncation"]["removed"] <= 0.001
    assert [row[0] for row in summary["tails"]] == [1, 10, 20, 30, 40, 50, 60]
    assert (tmp_path / "wavelet_unit1d-B1_tails_q0.3.csv").exists()
    assert len(summary["outputs"]) == 3


def test_regularity_without_c(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "regularity", "--preset", "unit1d", "--order", "2", "--no-c")
    assert code == EXIT_OK
    assert set(summary) - {"command"} == REGULARITY_KEYS
    assert summary["preset"] == "unit1d"
    assert summary["order"] == 2
    assert summary["alpha_C"] is None
    assert summary["alpha_L2"] > 1.0


def test_unknown_preset_is_validation_error(capsys, tmp_path):
    code, _ = run_json(capsys, tmp_path, "mask", "--preset", "nope")
    assert code == EXIT_VALIDATION


def test_bad_config_is_validation_error(capsys, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text('{"nope": 1}', encoding="utf-8")
    code = main(["--quiet", "--config", str(config), "tails"])
    assert code == EXIT_VALIDATION
    assert "nope" in capsys.readouterr().err


def test_plain_output(capsys, tmp_path):
    assert main(["--quiet", "--output-dir", str(tmp_path), "tails", "--m", "30"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "H1:" in out and "command: tails" in out


@pytest.mark.slow
def test_regularity_bear(capsys, tmp_path):
    code, summary = run_json(capsys, tmp_path, "regularity", "--preset", "bear", "--order", "1")
    assert code == EXIT_OK
    assert set(summary) - {"command"} == REGULARITY_KEYS
    assert (summary["preset"], summary["order"], summary["k"]) == ("bear", 1, 1)
    assert summary["alpha_L2"] == pytest.approx(1.5372, abs=1e-3)
    lo, hi = summary["alpha_C"]
    assert lo - 1e-4 <= 0.7892 <= hi + 1e-4
