"""Tests for the command-line surface.

Exit-code contract: 0 success, 1 runtime failure, 2 usage error. argparse
raises SystemExit(2) for flag-level violations; main() returns codes for
everything else. Commands are exercised in-process through main(argv).
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from devdiet.cli import main
from devdiet.metrics import PREDICTION_CSV_HEADER, PredictionRecord, write_prediction_csv
from devdiet.pipeline import read_manifest, save_png
from devdiet.schedules import SCHEDULE_CSV_HEADER

from core_testutil import make_image
from test_pipeline import build_dataset


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def dataset(tmp_path):
    root = tmp_path / "data"
    build_dataset(root)
    return root


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------


def test_schedule_step10_is_31_rows(capsys):
    code, out, _ = run_cli(capsys, "schedule", "--step", "10")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == SCHEDULE_CSV_HEADER
    assert len(lines) == 1 + 31


def test_schedule_negative_step_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["schedule", "--step", "-1"])
    assert exc_info.value.code == 2


def test_schedule_custom_anchors_step50(tmp_path, capsys):
    from importlib import resources

    anchors = tmp_path / "anchors.json"
    anchors.write_text(
        resources.files("devdiet.data").joinpath("anchors.json").read_text("utf-8")
    )
    code, out, _ = run_cli(capsys, "schedule", "--anchors", str(anchors), "--step", "50")
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 7


def test_schedule_out_file(tmp_path, capsys):
    out_file = tmp_path / "sched.csv"
    code, out, err = run_cli(capsys, "schedule", "--step", "300", "--out", str(out_file))
    assert code == 0
    assert out == ""  # data went to the file, progress to stderr
    assert str(out_file) in err
    assert out_file.read_text().splitlines()[0] == SCHEDULE_CSV_HEADER


# ---------------------------------------------------------------------------
# preview
# ---------------------------------------------------------------------------


def test_preview_writes_requested_ages(tmp_path, capsys):
    src = tmp_path / "img.png"
    save_png(make_image(2, h=32, w=32), src)
    code, out, _ = run_cli(
        capsys, "preview", str(src), "--ages", "0,300", "--out", str(tmp_path / "prev")
    )
    assert code == 0
    paths = out.strip().splitlines()
    assert len(paths) == 2
    assert all(p.endswith(".png") for p in paths)


def test_preview_unreadable_image_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    code, _, err = run_cli(capsys, "preview", str(bad), "--out", str(tmp_path / "p"))
    assert code == 1
    assert "error" in err


def test_preview_out_of_range_age_is_usage_error(tmp_path):
    src = tmp_path / "img.png"
    save_png(make_image(2, h=16, w=16), src)
    with pytest.raises(SystemExit) as exc_info:
        main(["preview", str(src), "--ages", "500", "--out", str(tmp_path / "p")])
    assert exc_info.value.code == 2


# ---------------------------------------------------------------------------
# process
# ---------------------------------------------------------------------------


def test_process_clock_anchor_and_manifest(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, err = run_cli(
        capsys, "process", str(dataset), "--out", str(out),
        "--alpha", "2", "--epoch", "10",
    )
    assert code == 0
    assert stdout.strip().endswith("manifest.json")
    manifest = read_manifest(out)
    assert manifest["age_months"] == 20.0
    assert manifest["config"]["alpha"] == 2.0
    assert len(manifest["outputs"]) == 6
    assert "ingested 6 image(s)" in err


def test_process_rearing_sets_stage_flags(dataset, tmp_path, capsys):
    code, _, _ = run_cli(
        capsys, "process", str(dataset), "--out", str(tmp_path / "out"),
        "--epoch", "1", "--rearing", "contrast_only",
    )
    assert code == 0
    cfg = read_manifest(tmp_path / "out")["config"]
    assert (cfg["enable_acuity"], cfg["enable_contrast"], cfg["enable_chroma"]) == (
        False, True, False,
    )


def test_process_config_file_and_flag_precedence(dataset, tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"alpha": 4.0, "seed": 9}))
    code, _, _ = run_cli(
        capsys, "process", str(dataset), "--out", str(tmp_path / "a"),
        "--epoch", "1", "--config", str(cfg_file),
    )
    assert code == 0
    manifest = read_manifest(tmp_path / "a")
    assert manifest["config"]["alpha"] == 4.0  # file overrides default
    assert manifest["config"]["seed"] == 9
    code, _, _ = run_cli(
        capsys, "process", str(dataset), "--out", str(tmp_path / "b"),
        "--epoch", "1", "--config", str(cfg_file), "--alpha", "2",
    )
    assert code == 0
    assert read_manifest(tmp_path / "b")["config"]["alpha"] == 2.0  # flag wins
    assert read_manifest(tmp_path / "b")["config"]["seed"] == 9


def test_process_unknown_config_field_is_usage_error(dataset, tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"alpha": 2.0, "gamma": 1.0}))
    code, _, err = run_cli(
        capsys, "process", str(dataset), "--out", str(tmp_path / "out"),
        "--epoch", "1", "--config", str(cfg_file),
    )
    assert code == 2
    assert "gamma" in err


def test_process_malformed_config_json_is_usage_error(dataset, tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text("{not json")
    code, _, err = run_cli(
        capsys, "process", str(dataset), "--out", str(tmp_path / "out"),
        "--epoch", "1", "--config", str(cfg_file),
    )
    assert code == 2
    assert "JSON" in err


def test_process_missing_dataset_is_runtime_error(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "process", str(tmp_path / "nope"), "--out", str(tmp_path / "out"),
        "--epoch", "1",
    )
    assert code == 1
    assert "not a directory" in err


def test_process_partial_failure_exits_1_with_incomplete_manifest(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    (out / "cat").write_text("blocks the class directory")
    code, _, err = run_cli(
        capsys, "process", str(dataset), "--out", str(out), "--epoch", "1"
    )
    assert code == 1
    assert "incomplete" in err
    assert read_manifest(out)["incomplete"] is True


# ---------------------------------------------------------------------------
# corrupt
# ---------------------------------------------------------------------------


def test_corrupt_kind_and_severities(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, _ = run_cli(
        capsys, "corrupt", str(dataset), "--out", str(out),
        "--kind", "gaussian_noise", "--severity", "1,3",
    )
    assert code == 0
    manifest = read_manifest(out)
    assert manifest["specs"] == ["corrupt:gaussian_noise:1", "corrupt:gaussian_noise:3"]
    assert len(manifest["outputs"]) == 12
    assert stdout.strip().endswith("manifest.json")


def test_corrupt_attack_amplitude(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code, _, _ = run_cli(
        capsys, "corrupt", str(dataset), "--out", str(out),
        "--attack", "l2_uniform", "--amplitude", "50",
    )
    assert code == 0
    manifest = read_manifest(out)
    assert manifest["specs"] == ["attack:l2_uniform:50"]
    assert all(row["amplitude"] == 50 for row in manifest["outputs"])


def test_corrupt_unknown_kind_lists_valid_kinds(dataset, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["corrupt", str(dataset), "--out", str(tmp_path / "o"),
              "--kind", "fog_bank"])
    assert exc_info.value.code == 2
    err = capsys.readouterr().err
    assert "gaussian_noise" in err and "wave_distortion" in err


def test_corrupt_requires_exactly_one_of_kind_attack(dataset, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["corrupt", str(dataset), "--out", str(tmp_path / "o")])
    assert exc_info.value.code == 2
    with pytest.raises(SystemExit) as exc_info:
        main(["corrupt", str(dataset), "--out", str(tmp_path / "o"),
              "--kind", "snow", "--attack", "l2_gaussian"])
    assert exc_info.value.code == 2


def test_corrupt_bad_severity_value_is_usage_error(dataset, tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "corrupt", str(dataset), "--out", str(tmp_path / "o"),
        "--kind", "snow", "--severity", "7",
    )
    assert code == 2
    assert "severity" in err


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def cue_log(tmp_path, n_shape=9, n_texture=3):
    recs = []
    for i in range(n_shape):
        recs.append(PredictionRecord(f"s{i}", "cat", shape_label="cat",
                                     texture_label="elephant"))
    for i in range(n_texture):
        recs.append(PredictionRecord(f"t{i}", "elephant", shape_label="cat",
                                     texture_label="elephant"))
    path = tmp_path / "log.csv"
    write_prediction_csv(recs, path)
    return path


def test_score_shape_bias_csv(tmp_path, capsys):
    log = cue_log(tmp_path)
    code, out, _ = run_cli(capsys, "score", str(log), "--metric", "shape-bias")
    assert code == 0
    assert out.splitlines()[0] == "category,n_shape,n_texture,n_neither,shape_bias"
    assert "cat,9,3,0,0.75" in out


def test_score_shape_bias_json(tmp_path, capsys):
    log = cue_log(tmp_path)
    code, out, _ = run_cli(capsys, "score", str(log), "--metric", "shape-bias", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["shape_bias"]["overall_median"] == 0.75


def test_score_recall_default_map(tmp_path, capsys):
    recs = (
        [PredictionRecord(f"a{i}", "teapot", shape_label="teapot",
                          scene_label="city") for i in range(4)]
        + [PredictionRecord(f"b{i}", "city", shape_label="teapot",
                            scene_label="city") for i in range(5)]
        + [PredictionRecord("c0", "zebra", shape_label="teapot", scene_label="city")]
    )
    log = tmp_path / "log.csv"
    write_prediction_csv(recs, log)
    code, out, _ = run_cli(capsys, "score", str(log), "--metric", "recall", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["shape_scene_recall"]["shape_recall"] == 40.0
    assert doc["shape_scene_recall"]["scene_recall"] == 50.0
    assert doc["shape_scene_recall"]["n_unmapped"] == 1


def test_score_robustness_csv(tmp_path, capsys):
    recs = [
        PredictionRecord(f"r{s}{i}", "cat" if i < 5 else "dog", shape_label="cat",
                         severity=s, condition="all")
        for s in (1, 2) for i in range(10)
    ]
    log = tmp_path / "log.csv"
    write_prediction_csv(recs, log)
    code, out, _ = run_cli(capsys, "score", str(log), "--metric", "robustness")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "condition,severity,top1_accuracy,n_records"
    assert lines[1] == "all,1,0.5,10"


def test_score_malformed_row_exits_1_with_line_number(tmp_path, capsys):
    log = tmp_path / "log.csv"
    log.write_text(PREDICTION_CSV_HEADER + "\nimg1,cat,cat,elephant,,,\nimg2,cat\n")
    code, _, err = run_cli(capsys, "score", str(log), "--metric", "shape-bias")
    assert code == 1
    assert "line 3" in err


def test_score_out_file(tmp_path, capsys):
    log = cue_log(tmp_path)
    out_file = tmp_path / "bias.csv"
    code, out, _ = run_cli(
        capsys, "score", str(log), "--metric", "shape-bias", "--out", str(out_file)
    )
    assert code == 0
    assert out == ""
    assert "0.75" in out_file.read_text()


# ---------------------------------------------------------------------------
# harness-level contracts
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv", [["schedule"], ["preview"], ["process"], ["corrupt"], ["score"]]
)
def test_every_subcommand_has_help(argv, capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(argv + ["--help"])
    assert exc_info.value.code == 0
    assert "--help" in capsys.readouterr().out


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2


def test_installed_entry_point_runs():
    result = subprocess.run(
        ["dvd", "schedule", "--step", "150"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert result.stdout.splitlines()[0] == SCHEDULE_CSV_HEADER
    assert len(result.stdout.strip().splitlines()) == 1 + 3


def test_cli_reproducibility_byte_exact(dataset, tmp_path, capsys):
    args = ["corrupt", str(dataset), "--kind", "snow", "--severity", "2", "--seed", "5"]
    code1, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    code2, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
    assert code1 == code2 == 0
    m1, m2 = read_manifest(tmp_path / "a"), read_manifest(tmp_path / "b")
    assert [r["sha256"] for r in m1["outputs"]] == [r["sha256"] for r in m2["outputs"]]
    files = [r["path"] for r in m1["outputs"]]
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
