"""Shared fixtures, including the cached heavy pipeline runs.

The expensive end-to-end cells (full 2350-row datasets, default training
budgets) are executed once per session through the CLI so that the
acceptance criteria, the trend properties, and the determinism checks
all reuse the same artifacts. Cells run two at a time in subprocesses.
"""

from __future__ import annotations

import json
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from rssiloc.data import Dataset


@dataclass
class PipelineCell:
    """Artifacts and metrics of one CLI pipeline run."""

    config: str
    algorithm: str
    seed: int
    root: Path
    model_path: Path
    report_path: Path
    known: dict
    unknown: dict


def _run_cli(args: list[str]) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "rssiloc", *args],
                          capture_output=True, text=True)


def generate_testbed(root: Path, config: str, seed: int) -> Path:
    """gen-data with defaults (25 samples/point, 15 per unknown point)."""
    data_dir = root / f"data-{config}-{seed}"
    if not (data_dir / "train_pool.csv").exists():
        done = _run_cli(["gen-data", "--seed", str(seed), "--config", config,
                         "--out-dir", str(data_dir)])
        assert done.returncode == 0, done.stderr
    return data_dir


def run_pipeline_cell(root: Path, config: str, algorithm: str,
                      seed: int) -> PipelineCell:
    """gen-data + train + eval(known holdout) + eval(unknown) via the CLI."""
    data_dir = generate_testbed(root, config, seed)
    cell_dir = root / f"cell-{config}-{algorithm}-{seed}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    model_path = cell_dir / "model.mlpl"
    report_path = cell_dir / "model.report.txt"
    done = _run_cli(["train", "--data", str(data_dir / "train_pool.csv"),
                     "--algo", algorithm, "--seed", str(seed),
                     "--out", str(model_path),
                     "--test-out", str(cell_dir / "holdout.csv")])
    assert done.returncode == 0, done.stderr
    evals = {}
    for name, csv in (("known", cell_dir / "holdout.csv"),
                      ("unknown", data_dir / "unknown_test.csv")):
        out = cell_dir / f"eval_{name}.json"
        done = _run_cli(["eval", "--model", str(model_path),
                         "--data", str(csv), "--json", str(out)])
        assert done.returncode == 0, done.stderr
        evals[name] = json.loads(out.read_text())
    return PipelineCell(config, algorithm, seed, cell_dir, model_path,
                        report_path, evals["known"], evals["unknown"])


SEEDS = (1, 2, 3, 4, 5)


@pytest.fixture(scope="session")
def pipeline_cells(tmp_path_factory) -> dict[tuple[str, str, int], PipelineCell]:
    """Every heavy cell the suite needs, keyed by (config, algo, seed)."""
    root = tmp_path_factory.mktemp("pipeline")
    wanted = [("four", algo, seed)
              for algo in ("lm", "br", "rp", "scg", "gd") for seed in SEEDS]
    wanted += [("two_a", "br", seed) for seed in SEEDS]
    wanted += [("three_a", "br", seed) for seed in SEEDS]
    for config, _, seed in wanted:
        generate_testbed(root, config, seed)
    with ThreadPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(
            lambda key: run_pipeline_cell(root, *key), wanted))
    return {(c.config, c.algorithm, c.seed): c for c in results}


@pytest.fixture
def tiny_dataset() -> Dataset:
    """8 rows, 3 anchors, deterministic values."""
    rng = np.random.default_rng(1234)
    return Dataset(rng.uniform(-90, -30, (8, 3)), rng.uniform(0, 4, (8, 2)),
                   metadata="tiny")


def make_linear_dataset(n_inputs: int = 2, rows: int = 40, seed: int = 7):
    """Targets are an exact affine map of the inputs (well conditioned)."""
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(rows, n_inputs))
    inputs = -60.0 + 10.0 * signs  # two-point design per channel
    coeff = np.array([[0.02, -0.03], [0.01, 0.04]])[:n_inputs, :]
    targets = np.array([1.0, 2.0]) + inputs @ coeff
    return Dataset(inputs, targets, metadata="linear-sanity")
