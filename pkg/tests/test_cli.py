import json
import os

import numpy as np
import pytest

from rssiloc.cli import main
from rssiloc.data import read_csv
from rssiloc.mlp import Activation, MlpModel
from rssiloc.modelio import save_model


def run(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture
def small_data(tmp_path):
    """A small but trainable synthetic dataset (94 points x 3 samples)."""
    code = run("gen-data", "--seed", 3, "--samples-per-point", 3,
               "--samples-per-unknown", 2, "--out-dir", tmp_path)
    assert code == 0
    return tmp_path


class TestGenData:
    def test_default_counts(self, tmp_path):
        assert run("gen-data", "--out-dir", tmp_path) == 0
        pool = read_csv(tmp_path / "train_pool.csv")
        unknown = read_csv(tmp_path / "unknown_test.csv")
        assert len(pool) == 2350 and pool.point_count == 94
        assert len(unknown) == 105 and unknown.point_count == 7

    def test_config_arity(self, tmp_path):
        assert run("gen-data", "--config", "two_a", "--samples-per-point", 2,
                   "--samples-per-unknown", 1, "--out-dir", tmp_path) == 0
        assert read_csv(tmp_path / "train_pool.csv").anchor_count == 2

    def test_unknown_config_lists_valid_names(self, tmp_path, capsys):
        assert run("gen-data", "--config", "six", "--out-dir", tmp_path) == 1
        err = capsys.readouterr().err
        assert "two_a" in err and "five" in err
        assert not (tmp_path / "train_pool.csv").exists()

    def test_bad_channel_config_exits_2(self, tmp_path):
        bad = tmp_path / "testbed.cfg"
        bad.write_text("p0_dbm = not-a-number\n")
        assert run("gen-data", "--channel-config", bad,
                   "--out-dir", tmp_path) == 2

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RSSILOC_OUT_DIR", str(tmp_path))
        assert run("gen-data", "--samples-per-point", 2,
                   "--samples-per-unknown", 1) == 0
        assert (tmp_path / "train_pool.csv").exists()


class TestTrain:
    def test_br_end_to_end(self, small_data, capsys):
        code = run("train", "--data", small_data / "train_pool.csv",
                   "--algo", "br", "--seed", 3, "--max-epochs", 30,
                   "--out", small_data / "model.mlpl")
        assert code == 0
        assert (small_data / "model.mlpl").exists()
        assert (small_data / "model.report.txt").exists()
        assert (small_data / "model.report.time").exists()
        assert "br" in capsys.readouterr().out

    def test_zero_hidden_is_usage_error(self, small_data):
        assert run("train", "--data", small_data / "train_pool.csv",
                   "--hidden", "0") == 1

    def test_missing_dataset_exits_2_without_artifacts(self, tmp_path):
        assert run("train", "--data", tmp_path / "nope.csv",
                   "--out", tmp_path / "model.mlpl") == 2
        assert list(tmp_path.iterdir()) == []

    def test_rerun_byte_identical(self, small_data):
        args = ("train", "--data", small_data / "train_pool.csv",
                "--algo", "lm", "--seed", 4, "--max-epochs", 25)
        assert run(*args, "--out", small_data / "a.mlpl",
                   "--report", small_data / "a.txt") == 0
        assert run(*args, "--out", small_data / "b.mlpl",
                   "--report", small_data / "b.txt") == 0
        assert (small_data / "a.mlpl").read_bytes() == \
            (small_data / "b.mlpl").read_bytes()
        assert (small_data / "a.txt").read_bytes() == \
            (small_data / "b.txt").read_bytes()

    def test_holdout_written_when_asked(self, small_data):
        assert run("train", "--data", small_data / "train_pool.csv",
                   "--algo", "gd", "--max-epochs", 5,
                   "--out", small_data / "m.mlpl",
                   "--test-out", small_data / "holdout.csv") == 0
        holdout = read_csv(small_data / "holdout.csv")
        pool = read_csv(small_data / "train_pool.csv")
        # stratified: 3 samples per point -> 2 train / 1 test at each point
        assert len(holdout) == pool.point_count
        assert holdout.point_count == pool.point_count


class TestEvalInfer:
    @pytest.fixture
    def zero_model(self, tmp_path):
        model = MlpModel([3, 2], [np.zeros((3, 2))], [np.zeros(2)],
                         [Activation.PURELIN], [(-96.0, -20.0)] * 3,
                         [(0.0, 3.6), (0.0, 4.5)])
        path = tmp_path / "zero.mlpl"
        save_model(model, path)
        return path

    def test_infer_constant_network(self, zero_model, capsys):
        assert run("infer", "--model", zero_model,
                   "--rssi", "-50,-60,-70") == 0
        assert capsys.readouterr().out.strip() == "1.8000 2.2500"

    def test_infer_arity_mismatch_exits_2(self, zero_model):
        assert run("infer", "--model", zero_model, "--rssi", "-50,-60") == 2

    def test_infer_bad_rssi_is_usage_error(self, zero_model):
        assert run("infer", "--model", zero_model, "--rssi", "-50,abc") == 1

    def test_infer_missing_model_exits_2(self, tmp_path):
        assert run("infer", "--model", tmp_path / "missing.mlpl",
                   "--rssi", "-50,-60,-70") == 2

    def test_eval_overfit_interpolates(self, small_data, capsys):
        assert run("train", "--data", small_data / "train_pool.csv",
                   "--algo", "lm", "--seed", 5, "--max-epochs", 40,
                   "--out", small_data / "m.mlpl",
                   "--test-out", small_data / "holdout.csv") == 0
        capsys.readouterr()
        assert run("eval", "--model", small_data / "m.mlpl",
                   "--data", small_data / "holdout.csv",
                   "--json", small_data / "eval.json") == 0
        out = capsys.readouterr().out
        assert "average error" in out
        doc = json.loads((small_data / "eval.json").read_text())
        assert set(doc) >= {"average_error_m", "max_error_m",
                            "pct_below_0p8", "n", "per_row_errors"}

    def test_eval_corrupt_model_exits_2(self, small_data):
        bad = small_data / "bad.mlpl"
        bad.write_bytes(b"MLPLxxxx-corrupt")
        assert run("eval", "--model", bad,
                   "--data", small_data / "train_pool.csv") == 2


class TestSweepPlot:
    @pytest.fixture(scope="class")
    def sweep_dir(self, tmp_path_factory):
        out = tmp_path_factory.mktemp("sweep")
        code = run("sweep", "--configs", "two_a,four", "--algos", "lm,br",
                   "--seeds", "1,2", "--samples-per-point", 3,
                   "--samples-per-unknown", 2, "--max-epochs", 20,
                   "--jobs", 1, "--out-dir", out)
        assert code == 0
        return out

    def test_sweep_cell_count(self, sweep_dir):
        lines = (sweep_dir / "sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2 * 2
        doc = json.loads((sweep_dir / "sweep.json").read_text())
        assert doc["kind"] == "anchor_sweep"
        times = json.loads((sweep_dir / "sweep.times.json").read_text())
        assert len(times["seconds"]) == 8

    def test_plot_from_sweep(self, sweep_dir, tmp_path):
        assert run("plot", "--report", sweep_dir / "sweep.json",
                   "--out-dir", tmp_path) == 0
        svg = (tmp_path / "error_by_config.svg").read_text()
        assert svg.startswith("<svg")
        assert (tmp_path / "error_by_config.csv").exists()

    def test_plot_deterministic_bytes(self, sweep_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("plot", "--report", sweep_dir / "sweep.json",
                   "--out-dir", a) == 0
        assert run("plot", "--report", sweep_dir / "sweep.json",
                   "--out-dir", b) == 0
        assert (a / "error_by_config.svg").read_bytes() == \
            (b / "error_by_config.svg").read_bytes()

    def test_plot_empty_report_exits_2(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text("")
        assert run("plot", "--report", empty, "--out-dir", tmp_path) == 2

    def test_bad_seeds_usage_error(self, tmp_path):
        assert run("sweep", "--seeds", "1,x", "--out-dir", tmp_path) == 1


class TestExportCommand:
    def test_export_writes_source_and_table(self, small_data):
        assert run("train", "--data", small_data / "train_pool.csv",
                   "--algo", "gd", "--max-epochs", 5,
                   "--out", small_data / "m.mlpl") == 0
        assert run("export", "--model", small_data / "m.mlpl",
                   "--out", small_data / "net.c", "--precision", "f32") == 0
        source = (small_data / "net.c").read_text()
        assert "typedef float" in source
        assert (small_data / "net_conformance.csv").exists()

    def test_missing_model_exits_2(self, tmp_path):
        assert run("export", "--model", tmp_path / "missing.mlpl",
                   "--out", tmp_path / "net.c") == 2
        assert not (tmp_path / "net.c").exists()


class TestHelpAndUsage:
    @pytest.mark.parametrize("command", ["gen-data", "train", "eval", "sweep",
                                         "infer", "export", "plot", "serve"])
    def test_help_exits_zero(self, command, capsys):
        assert run(command, "--help") == 0
        out = capsys.readouterr().out
        assert "--" in out  # flags are listed

    def test_no_command_prints_help(self, capsys):
        assert run() == 1
        assert "COMMAND" in capsys.readouterr().out

    def test_unknown_flag_is_usage_error(self, capsys):
        assert run("gen-data", "--bogus") == 1
        assert "error" in capsys.readouterr().err
