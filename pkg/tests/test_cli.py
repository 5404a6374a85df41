import copy
import json

import numpy as np
import pytest

from cpdetect.cli import main
from cpdetect.config import RunConfig
from cpdetect.runner import run_detect
from cpdetect.simulate import gen_piecewise_gaussian


def write_series(path, values):
    path.write_text("\n".join(repr(float(v)) for v in values) + "\n")


def gaussian_config(data_path, out_path, g=5, k_max=3):
    return RunConfig.from_mapping(
        {
            "data.path": str(data_path),
            "data.format": "numeric",
            "model.kind": "gaussian-conjugate",
            "grid.g": str(g),
            "k.max": str(k_max),
            "output.path": str(out_path),
        }
    )


@pytest.fixture
def shift_series(tmp_path):
    y = gen_piecewise_gaussian([0.0, 6.0], [1.0, 1.0], [60, 60], seed=0)
    path = tmp_path / "y.csv"
    write_series(path, y)
    return path


class TestRunDetect:
    def test_detects_planted_shift(self, tmp_path, shift_series):
        config = gaussian_config(shift_series, tmp_path / "out.json")
        document, result = run_detect(config)
        assert result.map_k == 1
        assert abs(int(result.refined_positions[0]) - 60) <= 2
        assert document["result"]["map_k"] == 1
        post = np.array(document["result"]["posterior_k"])
        assert post.sum() == pytest.approx(1.0, abs=1e-9)

    def test_document_reproducible_except_timings(self, tmp_path, shift_series):
        config = gaussian_config(shift_series, tmp_path / "out.json")
        doc1, _ = run_detect(config)
        doc2, _ = run_detect(config)
        doc1 = copy.deepcopy(doc1)
        doc2 = copy.deepcopy(doc2)
        doc1.pop("timings")
        doc2.pop("timings")
        assert json.dumps(doc1, sort_keys=True) == json.dumps(doc2, sort_keys=True)

    def test_worker_count_does_not_change_document(self, tmp_path, shift_series):
        base = gaussian_config(shift_series, tmp_path / "a.json")
        doc1, _ = run_detect(base)
        two = gaussian_config(shift_series, tmp_path / "b.json")
        two.workers = 2
        doc2, _ = run_detect(two)
        r1, r2 = doc1["result"], doc2["result"]
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)

    def test_config_echo_contains_every_default(self, tmp_path, shift_series):
        config = gaussian_config(shift_series, tmp_path / "out.json")
        document, _ = run_detect(config)
        echo = document["config"]
        assert set(echo) == set(RunConfig._KEYMAP)
        assert echo["model.alpha"] == 1.0
        assert echo["hyper.nodes_per_dim"] == 9

    def test_sampling_block(self, tmp_path, shift_series):
        config = gaussian_config(shift_series, tmp_path / "out.json")
        config.samples_count = 25
        document, result = run_detect(config)
        assert len(document["result"]["samples"]) == 25
        assert result.samples_time.shape == (25, result.map_k)


class TestCliCommands:
    def test_detect_and_report_roundtrip(self, tmp_path, shift_series, capsys):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "res.json"
        cfg.write_text(
            f"data.path = {shift_series}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "grid.g = 5\n"
            "k.max = 3\n"
            f"output.path = {out}\n"
        )
        assert main(["detect", "--config", str(cfg)]) == 0
        document = json.loads(out.read_text())
        assert document["result"]["map_k"] == 1

        outdir = tmp_path / "figs"
        assert main(["report", "--result", str(out), "--outdir", str(outdir)]) == 0
        assert (outdir / "posterior_k.png").exists()
        assert (outdir / "segmentation.png").exists()
        assert (outdir / "summary.csv").exists()
        rows = (outdir / "summary.csv").read_text().splitlines()
        assert rows[0] == "k,log_marginal,log_prior,posterior"

    def test_detect_set_override(self, tmp_path, shift_series):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "res.json"
        cfg.write_text(
            f"data.path = {shift_series}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "grid.g = 5\n"
            "k.max = 3\n"
        )
        code = main(
            [
                "detect",
                "--config",
                str(cfg),
                "--set",
                "grid.g=10",
                "--output",
                str(out),
            ]
        )
        assert code == 0
        assert json.loads(out.read_text())["config"]["grid.g"] == 10

    def test_refine_subcommand(self, tmp_path, shift_series):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "res.json"
        cfg.write_text(
            f"data.path = {shift_series}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "grid.g = 5\n"
            "k.max = 3\n"
            "refine.enabled = false\n"
            f"output.path = {out}\n"
        )
        assert main(["detect", "--config", str(cfg)]) == 0
        before = json.loads(out.read_text())
        assert before["result"]["refined_positions"] is None
        refined_out = tmp_path / "refined.json"
        assert main(["refine", "--result", str(out), "--out", str(refined_out)]) == 0
        after = json.loads(refined_out.read_text())
        assert abs(after["result"]["refined_positions"][0] - 60) <= 2

    def test_ingest_check(self, tmp_path, capsys):
        path = tmp_path / "seq.fa"
        path.write_text(">h\nACGT\n")
        assert main(["ingest-check", "--data", str(path), "--format", "fasta"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["n"] == 4

    def test_simulate_roundtrip(self, tmp_path):
        out = tmp_path / "sv.csv"
        assert main(["simulate", "--kind", "sv", "--out", str(out), "--seed", "3"]) == 0
        values = [float(v) for v in out.read_text().splitlines()]
        assert len(values) == 1000
        meta = json.loads((tmp_path / "sv.csv.meta.json").read_text())
        assert meta["seed"] == 3
        assert meta["true_changepoints"] == [200, 400, 600, 700, 800, 850, 900, 950]

    def test_bayes_factor_same_config_is_one(self, tmp_path, shift_series, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"data.path = {shift_series}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "grid.g = 5\n"
            "k.max = 2\n"
        )
        out = tmp_path / "bf.json"
        code = main(
            [
                "bayes-factor",
                "--config-a",
                str(cfg),
                "--config-b",
                str(cfg),
                "--k",
                "1",
                "2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["factors"]["1"]["bayes_factor"] == pytest.approx(1.0)
        assert report["factors"]["2"]["bayes_factor"] == pytest.approx(1.0)

    def test_bayes_factor_rejects_mismatched_grid(self, tmp_path, shift_series):
        cfg_a = tmp_path / "a.cfg"
        cfg_b = tmp_path / "b.cfg"
        base = (
            f"data.path = {shift_series}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "k.max = 2\n"
        )
        cfg_a.write_text(base + "grid.g = 5\n")
        cfg_b.write_text(base + "grid.g = 10\n")
        code = main(
            ["bayes-factor", "--config-a", str(cfg_a), "--config-b", str(cfg_b), "--k", "1"]
        )
        assert code == 2

    def test_exit_codes(self, tmp_path):
        missing = tmp_path / "missing.cfg"
        assert main(["detect", "--config", str(missing)]) == 2
        cfg = tmp_path / "bad_data.cfg"
        cfg.write_text(
            f"data.path = {tmp_path / 'nope.csv'}\n"
            "data.format = numeric\n"
            "model.kind = gaussian-conjugate\n"
            "grid.g = 5\n"
            "k.max = 2\n"
        )
        assert main(["detect", "--config", str(cfg)]) == 3
