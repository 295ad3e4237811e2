"""End-to-end command line coverage on a small world."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from roadgraph import apls, load_graph, save_graph, structurally_equal
from roadgraph.cli import main
from roadgraph.graphio import DataError, load_graph_text


@pytest.fixture(scope="session")
def config_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("cfg") / "small.json"
    path.write_text(json.dumps({"synth": {"width": 512, "height": 512}}))
    return path


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory, config_path) -> Path:
    out = tmp_path_factory.mktemp("worlds") / "w"
    assert main(["synth", "--seed", "3", "--out-dir", str(out),
                 "--config", str(config_path)]) == 0
    return out / "world_000"


@pytest.fixture(scope="session")
def detect_dir(tmp_path_factory, world_dir, config_path) -> Path:
    out = tmp_path_factory.mktemp("runs") / "oracle"
    assert main(["detect", "--world", str(world_dir), "--policy", "oracle",
                 "--config", str(config_path), "--out", str(out)]) == 0
    return out


def test_synth_outputs_and_determinism(tmp_path, config_path, world_dir):
    for name in ("image.png", "gt.json", "road_mask.png", "int_mask.png",
                 "meta.json"):
        assert (world_dir / name).exists()
    again = tmp_path / "again"
    assert main(["synth", "--seed", "3", "--out-dir", str(again),
                 "--config", str(config_path)]) == 0
    for name in ("image.png", "gt.json", "road_mask.png", "int_mask.png"):
        assert (again / "world_000" / name).read_bytes() == \
            (world_dir / name).read_bytes()


def test_synth_count_multiple(tmp_path, config_path):
    out = tmp_path / "many"
    assert main(["synth", "--seed", "7", "--out-dir", str(out), "--count",
                 "2", "--config", str(config_path)]) == 0
    assert (out / "world_000" / "gt.json").exists()
    assert (out / "world_001" / "gt.json").exists()
    a = load_graph(out / "world_000" / "gt.json")
    b = load_graph(out / "world_001" / "gt.json")
    assert not structurally_equal(a, b)


def test_detect_run_metadata(detect_dir, world_dir):
    run = json.loads((detect_dir / "run.json").read_text())
    assert run["policy"] == "oracle"
    assert not run["truncated"]
    assert run["vertices"] > 0 and run["edges"] > 0
    pred = load_graph(detect_dir / "pred.json")
    gt = load_graph(world_dir / "gt.json")
    assert apls(gt, pred) >= 0.95


def test_eval_command(tmp_path, world_dir, detect_dir, capsys):
    out = tmp_path / "report"
    assert main(["eval", "--gt", str(world_dir / "gt.json"),
                 "--pred", str(detect_dir / "pred.json"),
                 "--out", str(out), "--world", str(world_dir)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["apls"] >= 0.95
    assert "pixel" in report and "intersection" in report
    text = (out / "report.txt").read_text()
    assert "apls" in text
    assert text in capsys.readouterr().out


def test_eval_identity_is_perfect(tmp_path, world_dir):
    out = tmp_path / "self"
    assert main(["eval", "--gt", str(world_dir / "gt.json"),
                 "--pred", str(world_dir / "gt.json"),
                 "--out", str(out), "--world", str(world_dir)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["apls"] == 1.0
    for block in report["pixel"].values():
        assert block == [1.0, 1.0, 1.0]


def test_labels_and_audit_loss(tmp_path, world_dir, config_path):
    out = tmp_path / "labels"
    assert main(["labels", "--world", str(world_dir), "--config",
                 str(config_path), "--out", str(out)]) == 0
    doc = json.loads((out / "samples.json").read_text())
    assert doc["samples"]
    first = doc["samples"][0]
    assert (out / first["crops"]["roi"]).exists()

    preds = {str(s["step"]): [{"dx": l["dx"], "dy": l["dy"], "prob": 1.0}
                              for l in s["labels"]]
             for s in doc["samples"]}
    preds_path = tmp_path / "preds.json"
    preds_path.write_text(json.dumps(preds))
    audit_out = tmp_path / "audit.json"
    assert main(["audit-loss", "--samples", str(out / "samples.json"),
                 "--preds", str(preds_path), "--out", str(audit_out)]) == 0
    audit = json.loads(audit_out.read_text())
    # echoing the labels back as predictions zeroes the coordinate loss
    assert audit["coord_loss"] == pytest.approx(0.0, abs=1e-9)
    assert audit["total_loss"] >= 0.0


def test_overlay_writes_image(tmp_path, world_dir):
    out = tmp_path / "overlay.png"
    assert main(["overlay", "--image", str(world_dir / "image.png"),
                 "--graph", str(world_dir / "gt.json"),
                 "--out", str(out)]) == 0
    assert out.stat().st_size > 0


def test_show_config_round_trips(capsys, config_path):
    assert main(["show-config", "--config", str(config_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["synth"]["width"] == 512
    assert doc["engine"]["roi_side"] == 256
    assert doc["expert"]["tau"] == 40.0


def test_graph_save_load_round_trip(tmp_path, world_dir):
    g = load_graph(world_dir / "gt.json")
    path = tmp_path / "copy.json"
    save_graph(g, path)
    assert structurally_equal(load_graph(path), g)


def test_text_format_import(tmp_path):
    path = tmp_path / "legacy.txt"
    path.write_text("0 0\n100 0\n100 80\n\n0 1\n1 2\n")
    g = load_graph_text(path)
    assert g.num_vertices() == 3
    assert g.num_edges() == 2


def test_text_format_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 0\n100 nope\n")
    with pytest.raises(DataError, match=r"bad\.txt:2"):
        load_graph_text(path)
    path.write_text("0 0\n10 0\n\n0 5\n")
    with pytest.raises(DataError, match=r"bad\.txt:4"):
        load_graph_text(path)


def test_exit_code_usage_error(world_dir, tmp_path):
    assert main(["detect", "--world", str(world_dir), "--policy", "martian",
                 "--out", str(tmp_path / "x")]) == 1
    assert main(["no-such-command"]) == 1


def test_exit_code_data_error(tmp_path):
    missing = tmp_path / "not_a_world"
    missing.mkdir()
    assert main(["detect", "--world", str(missing),
                 "--out", str(tmp_path / "x")]) == 2
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("{\"typo_section\": {}}")
    assert main(["show-config", "--config", str(bad_cfg)]) == 2


def test_exit_code_truncation(tmp_path, world_dir):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps({"engine": {"max_steps_total": 2},
                               "synth": {"width": 512, "height": 512}}))
    assert main(["detect", "--world", str(world_dir), "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 3
    run = json.loads((tmp_path / "x" / "run.json").read_text())
    assert run["truncated"]
