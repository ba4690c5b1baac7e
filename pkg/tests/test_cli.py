import json

import numpy as np
import pytest

from macroflow.cli import main
from macroflow.io import read_instance, read_placement


def run(argv):
    return main([str(a) for a in argv])


GEN_ARGS = ["--count", 6, "--seed", 4, "--macro-count-min", 4, "--macro-count-max", 7,
            "--pins-min", 2, "--pins-max", 4]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen -> train -> sample pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert run(["gen", "--out", root / "ds", *GEN_ARGS]) == 0
    assert run([
        "train", "--data", root / "ds", "--out", root / "model.ckpt", "--seed", 1,
        "--epochs", 2, "--hidden-dim", 16, "--num-blocks", 1, "--num-heads", 2, "--time-dim", 8,
    ]) == 0
    assert run([
        "sample", "--model", root / "model.ckpt", "--instance", root / "ds" / "instance-00000.json",
        "--out", root / "placement.json", "--steps", 6, "--seed", 2, "--trace", root / "trace.json",
    ]) == 0
    return root


class TestPipeline:
    def test_dataset_written(self, workspace):
        assert (workspace / "ds" / "manifest.json").exists()
        inst, pos = read_instance(workspace / "ds" / "instance-00003.json")
        assert pos is not None

    def test_training_artifacts(self, workspace):
        assert (workspace / "model.ckpt").exists()
        curve = (workspace / "model.loss.tsv").read_text().splitlines()
        assert curve[0] == "step\tloss"
        assert len(curve) > 1

    def test_sampled_placement_is_legal(self, workspace, capsys):
        assert run(["eval", "--instance", workspace / "ds" / "instance-00000.json",
                    "--placement", workspace / "placement.json"]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["legal"] is True
        assert metrics["total_overlap"] == 0.0

    def test_eval_uses_embedded_placement(self, workspace, capsys):
        assert run(["eval", "--instance", workspace / "ds" / "instance-00001.json"]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["legal"] is True

    def test_render_layout_and_trace(self, workspace):
        out = workspace / "layout.svg"
        assert run(["render", "--instance", workspace / "ds" / "instance-00000.json",
                    "--placement", workspace / "placement.json", "--out", out, "--nets"]) == 0
        assert out.read_text().startswith("<svg")
        trace_svg = workspace / "trace.svg"
        assert run(["render", "--instance", workspace / "ds" / "instance-00000.json",
                    "--trace", workspace / "trace.json", "--out", trace_svg]) == 0
        assert trace_svg.read_text().count('class="frame"') == 7  # 6 steps + initial state

    def test_bench_subcommand(self, workspace):
        spec = {
            "instances": "ds",
            "seeds": [0, 1],
            "arms": [
                {"name": "hard", "checkpoint": "model.ckpt", "steps": 4},
                {"name": "free", "checkpoint": "model.ckpt", "steps": 4, "mode": "free"},
                {"name": "missing", "checkpoint": "nope.ckpt"},
            ],
        }
        (workspace / "spec.json").write_text(json.dumps(spec))
        assert run(["bench", "--spec", workspace / "spec.json",
                    "--out-dir", workspace / "bench", "--threads", 2]) == 0
        report = (workspace / "bench" / "report.csv").read_text()
        assert report.count("\n") == 1 + 2 * 6 * 2  # header + arms x instances x seeds
        agg = json.loads((workspace / "bench" / "aggregates.json").read_text())
        assert [s["arm"] for s in agg["skipped"]] == ["missing"]


class TestConfigFile:
    def test_config_equals_flags(self, workspace, tmp_path):
        cfg = {"count": 6, "seed": 4, "macro_count_min": 4, "macro_count_max": 7,
               "pins_min": 2, "pins_max": 4}
        cfg_path = tmp_path / "gen.json"
        cfg_path.write_text(json.dumps(cfg))
        assert run(["gen", "--out", tmp_path / "ds_cfg", "--config", cfg_path]) == 0
        a = (workspace / "ds" / "instance-00000.json").read_text()
        b = (tmp_path / "ds_cfg" / "instance-00000.json").read_text()
        assert a == b

    def test_cli_flag_beats_config(self, tmp_path):
        cfg_path = tmp_path / "gen.json"
        cfg_path.write_text(json.dumps({"count": 2, "macro_count_min": 3, "macro_count_max": 4}))
        assert run(["gen", "--out", tmp_path / "ds", "--config", cfg_path, "--count", 1]) == 0
        assert json.loads((tmp_path / "ds" / "manifest.json").read_text())["count"] == 1

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "gen.json"
        cfg_path.write_text(json.dumps({"coutn": 2}))
        assert run(["gen", "--out", tmp_path / "ds", "--config", cfg_path]) == 2
        assert "unknown config keys" in capsys.readouterr().err


class TestErrors:
    def test_missing_instance_file(self, tmp_path, capsys):
        assert run(["eval", "--instance", tmp_path / "nope.json"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_instance(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        assert run(["eval", "--instance", bad]) == 2
        err = capsys.readouterr().err
        assert "bad.json" in err
