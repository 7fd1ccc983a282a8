import json

import numpy as np
import pytest
from click.testing import CliRunner

from kmproxy.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture
def workspace(tmp_path, runner):
    """gen + split + fit + predict, small and fast."""
    d = tmp_path
    run_ok(runner, ["gen", "--out", str(d / "data.embd"), "--dim", "2",
                    "--classes", "2", "--per-class", "60", "--seed", "3"])
    run_ok(runner, ["split", "--in", str(d / "data.embd"),
                    "--out-train", str(d / "train.embd"),
                    "--out-test", str(d / "test.embd")])
    run_ok(runner, ["fit", "--in", str(d / "train.embd"), "--k", "2",
                    "--out", str(d / "model.kmpx")])
    run_ok(runner, ["predict", "--train", str(d / "train.embd"),
                    "--data", str(d / "test.embd"),
                    "--out", str(d / "preds.jsonl")])
    return d


class TestExitCodes:
    def test_usage_error_is_2(self, runner):
        assert runner.invoke(main, ["fit"]).exit_code == 2
        assert runner.invoke(main, ["fit", "--in", "x", "--k", "0", "--out", "y"]).exit_code == 2
        assert runner.invoke(main, ["nonsense"]).exit_code == 2
        assert runner.invoke(
            main, ["overlap", "a", "b", "--metric", "manhattan"]
        ).exit_code == 2

    def test_missing_input_is_3(self, runner, tmp_path):
        result = runner.invoke(main, ["fit", "--in", str(tmp_path / "no.embd"),
                                      "--out", str(tmp_path / "m.kmpx")])
        assert result.exit_code == 3

    def test_malformed_data_is_3(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "label": 0, "vector": [1.0], "junk": 1}\n')
        result = runner.invoke(main, ["fit", "--in", str(bad),
                                      "--out", str(tmp_path / "m.kmpx")])
        assert result.exit_code == 3
        assert "junk" in result.output

    def test_empty_predictions_is_3(self, runner, workspace):
        d = workspace
        (d / "empty.jsonl").write_text("")
        result = runner.invoke(main, [
            "score", "--model", str(d / "model.kmpx"), "--data", str(d / "test.embd"),
            "--preds", str(d / "empty.jsonl"),
        ])
        assert result.exit_code == 3

    def test_success_is_0(self, runner, workspace):
        pass  # the workspace fixture already asserted every step


class TestPipeline:
    def test_score_outputs(self, runner, workspace):
        d = workspace
        result = run_ok(runner, [
            "score", "--model", str(d / "model.kmpx"), "--data", str(d / "test.embd"),
            "--preds", str(d / "preds.jsonl"),
            "--out-decisions", str(d / "dec.jsonl"),
            "--out-report", str(d / "rep.json"),
        ])
        assert "macro_f1=" in result.output and "coverage=" in result.output
        rep = json.loads((d / "rep.json").read_text())
        assert set(rep) >= {"macro_f1", "coverage", "accepted", "total", "confusion"}
        lines = (d / "dec.jsonl").read_text().splitlines()
        assert len(lines) == rep["total"]
        first = json.loads(lines[0])
        assert set(first) == {"id", "accepted", "reasons", "proxy_index",
                              "proxy_label", "distance", "radius"}

    def test_overlap_outputs(self, runner, workspace):
        d = workspace
        result = run_ok(runner, [
            "overlap", str(d / "train.embd"), str(d / "test.embd"),
            "--metric", "l2", "--out", str(d / "ov.json"),
            "--per-point", str(d / "pp.tsv"),
        ])
        assert "p_a=" in result.output
        obj = json.loads((d / "ov.json").read_text())
        assert obj["o_directional"] == obj["p_a"]
        assert abs(obj["o_bidirectional"] - (obj["p_a"] + obj["p_b"]) / 2) < 1e-15
        header = (d / "pp.tsv").read_text().splitlines()[0]
        assert header == "id\tw\tb\tratio"

    def test_convert_round_trip_bytes(self, runner, workspace):
        d = workspace
        run_ok(runner, ["convert", str(d / "data.embd"), str(d / "data.jsonl")])
        run_ok(runner, ["convert", str(d / "data.jsonl"), str(d / "back.embd")])
        assert (d / "data.embd").read_bytes() == (d / "back.embd").read_bytes()

    def test_figures_rendered(self, runner, workspace):
        d = workspace
        run_ok(runner, [
            "score", "--model", str(d / "model.kmpx"), "--data", str(d / "test.embd"),
            "--preds", str(d / "preds.jsonl"), "--figures", str(d / "figs"),
        ])
        run_ok(runner, [
            "overlap", str(d / "train.embd"), str(d / "test.embd"),
            "--figures", str(d / "figs"),
        ])
        assert (d / "figs" / "decisions.png").stat().st_size > 0
        assert (d / "figs" / "overlap_ratios.png").stat().st_size > 0

    def test_eval_manifest(self, runner, workspace):
        d = workspace
        manifest = {
            "models": [{"name": "m", "model": "model.kmpx", "train": "train.embd"}],
            "evals": [{"name": "e", "data": "test.embd"}],
            "predictions": {"m": {"e": "preds.jsonl"}},
        }
        (d / "manifest.json").write_text(json.dumps(manifest))
        result = run_ok(runner, [
            "eval", "--manifest", str(d / "manifest.json"),
            "--out-json", str(d / "matrix.json"),
            "--out-table", str(d / "matrix.txt"),
        ])
        assert "f1/coverage/overlap" in result.output
        obj = json.loads((d / "matrix.json").read_text())
        assert obj["trains"] == ["m"] and obj["evals"] == ["e"]
        assert len(obj["cells"]) == 1
        assert (d / "matrix.txt").read_text() in result.output

    def test_eval_missing_reference_is_3(self, runner, workspace):
        d = workspace
        manifest = {
            "models": [{"name": "m", "model": "model.kmpx", "train": "train.embd"}],
            "evals": [{"name": "e", "data": "test.embd"}],
            "predictions": {"m": {"e": "missing.jsonl"}},
        }
        (d / "manifest.json").write_text(json.dumps(manifest))
        result = runner.invoke(main, ["eval", "--manifest", str(d / "manifest.json")])
        assert result.exit_code == 3
        assert "missing.jsonl" in result.output

    def test_gen_jsonl_extension(self, runner, tmp_path):
        out = tmp_path / "d.jsonl"
        run_ok(runner, ["gen", "--out", str(out), "--per-class", "5"])
        lines = out.read_text().splitlines()
        assert len(lines) == 10
        assert set(json.loads(lines[0])) == {"id", "label", "vector"}

    def test_repeated_run_identical_bytes(self, runner, tmp_path):
        for sub in ("a", "b"):
            d = tmp_path / sub
            d.mkdir()
            run_ok(runner, ["gen", "--out", str(d / "x.embd"), "--seed", "9",
                            "--per-class", "40"])
            run_ok(runner, ["fit", "--in", str(d / "x.embd"), "--k", "2",
                            "--out", str(d / "m.kmpx")])
        assert (tmp_path / "a" / "x.embd").read_bytes() == (tmp_path / "b" / "x.embd").read_bytes()
        assert (tmp_path / "a" / "m.kmpx").read_bytes() == (tmp_path / "b" / "m.kmpx").read_bytes()
