import csv
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from voidinspect.cli import main
from voidinspect.config import ConfigError, RunConfig, config_from_dict, load_config, resolve_jobs
from voidinspect.raster import save_image
from voidinspect.synth import SynthSpec, generate, save_truth

SCHEMA = json.loads(resources.files("voidinspect").joinpath("schemas/report.schema.json").read_text())


def write_config(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def grid_dir(tmp_path):
    """Two 2x3 synthetic grids with truth alongside."""
    d = tmp_path / "imgs"
    d.mkdir()
    for i in range(2):
        spec = SynthSpec(grid_rows=2, grid_cols=3, voids=((3, -2, 5),), seed=i)
        img, truth = generate(spec)
        save_image(d / f"grid{i}.png", img)
        save_truth(truth, d / f"grid{i}.truth.json")
    return d


def test_inspect_reports_validate(grid_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["inspect", str(grid_dir), "--out", str(out), "--overlay", "--dump-edges"]) == 0
    for i in range(2):
        rep = json.loads((out / f"grid{i}.proposed.json").read_text())
        jsonschema.validate(rep, SCHEMA)
        assert len(rep["balls"]) == 6
        assert all(b["provenance"] == "detected" for b in rep["balls"])
        assert all(0 < b["void_pct"] < 15 for b in rep["balls"])
        assert (out / f"grid{i}.proposed.overlay.png").exists()
        assert (out / f"grid{i}.edges.png").exists()
    rows = list(csv.reader((out / "summary.csv").open()))
    assert rows[0] == ["image", "ball_index", "provenance", "void_pct", "region_count", "method"]
    assert len(rows) == 13


def test_inspect_both_methods(grid_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["inspect", str(grid_dir / "grid0.png"), "--out", str(out), "--method", "both"]) == 0
    for m in ("proposed", "baseline"):
        rep = json.loads((out / f"grid0.{m}.json").read_text())
        jsonschema.validate(rep, SCHEMA)
        assert rep["method"] == m


def test_inspect_deterministic(grid_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["inspect", str(grid_dir), "--out", str(a), "--jobs", "1"]) == 0
    assert main(["inspect", str(grid_dir), "--out", str(b), "--jobs", "3"]) == 0
    for name in ("grid0.proposed.json", "grid1.proposed.json", "summary.csv", "grid0.proposed.mask.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_empty_dir_exit_2(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["inspect", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 2
    assert "no inputs" in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"scan": {"thr_1D": 6}})
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "scan.thr_1D" in capsys.readouterr().err


def test_corrupt_image_exit_1(grid_dir, tmp_path, capsys):
    (grid_dir / "broken.png").write_bytes(b"not an image")
    out = tmp_path / "out"
    assert main(["inspect", str(grid_dir), "--out", str(out)]) == 1
    assert "broken.png" in capsys.readouterr().err
    assert (out / "grid0.proposed.json").exists()


def test_synth_inspect_eval_loop(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"suite": "low_contrast", "count": 3})
    syn, ins, ev = tmp_path / "syn", tmp_path / "ins", tmp_path / "ev"
    assert main(["synth", "--config", cfg, "--out", str(syn), "--seed", "4"]) == 0
    suite = json.loads((syn / "suite.json").read_text())
    assert len(suite["images"]) == 3 and suite["seed"] == 4
    assert main(["inspect", str(syn), "--out", str(ins)]) == 0
    assert main(["eval", str(ins), "--truth", str(syn), "--out", str(ev)]) == 0
    res = json.loads((ev / "eval.json").read_text())
    assert 0 <= res["mean_iou"] <= 1
    assert len(res["images"]) == 3


def test_compare_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {"suite": "comparison", "count": 4})
    syn, cmp_ = tmp_path / "syn", tmp_path / "cmp"
    assert main(["synth", "--config", cfg, "--out", str(syn)]) == 0
    flags = [json.loads((syn / "suite.json").read_text())["images"][i]["broken_contours"] for i in range(4)]
    assert flags == [False, False, True, True]
    assert main(["compare", str(syn), "--out", str(cmp_)]) == 0
    data = json.loads((cmp_ / "comparison.json").read_text())
    for key in ("proposed_recall", "baseline_recall", "ordering_holds"):
        assert key in data
    assert "ordering_holds=" in capsys.readouterr().out


# -- config


def test_config_sections(tmp_path):
    cfg = load_config(write_config(tmp_path / "c.json", {
        "scan": {"thr_1d": 5}, "assembly": {"a_min": 12}, "baseline": {"max_join_distance": 3},
        "synth": {"voids": [[0, 0, 4]]}, "method": "both", "jobs": 2,
    }))
    assert cfg.detection.scan.thr_1d == 5 and cfg.detection.assembly.a_min == 12
    assert cfg.baseline.max_join_distance == 3 and cfg.synth.voids == ((0, 0, 4),)
    assert cfg.methods == ("proposed", "baseline") and cfg.jobs == 2


@pytest.mark.parametrize("data, key", [
    ({"bogus": 1}, "bogus"),
    ({"segmentation": {"window": 3}}, "segmentation.window"),
    ({"synth": {"radius": 3}}, "synth.radius"),
    ({"method": "magic"}, "method"),
    ({"assembly": {"a_min": 0}}, "assembly"),
])
def test_config_errors_name_key(data, key):
    with pytest.raises(ConfigError, match=key):
        config_from_dict(data)


def test_params_hash():
    a = RunConfig()
    assert a.params_hash() == RunConfig(out="elsewhere", jobs=4).params_hash()
    assert a.params_hash() != config_from_dict({"scan": {"thr_1d": 7}}).params_hash()
    assert len(a.params_hash()) == 16


def test_jobs_resolution(monkeypatch):
    monkeypatch.delenv("VOIDINSPECT_JOBS", raising=False)
    assert resolve_jobs(None, 3) == 3
    monkeypatch.setenv("VOIDINSPECT_JOBS", "5")
    assert resolve_jobs(None, 3) == 5
    assert resolve_jobs(2, 3) == 2
    monkeypatch.setenv("VOIDINSPECT_JOBS", "x")
    with pytest.raises(ConfigError):
        resolve_jobs(None, 1)
