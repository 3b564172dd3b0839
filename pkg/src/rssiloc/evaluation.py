"""Error metrics, the training-algorithm comparison, and the anchor sweep.

The per-row localization error is the Euclidean distance in meters
between estimated and true position; a test set is summarized by its
average error, maximum error, and the percentage of rows below the
0.8 m benchmark threshold.

Experiment cells are keyed by (anchor configuration, algorithm, seed),
so sweeps may execute cells in any order or in parallel and still
assemble identical reports.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import (AnchorConfig, ChannelModel, Deployment, generate_dataset)
from .data import (Dataset, GridSpec, SplitSpec, UNKNOWN_TEST_POINTS,
                   normalization_stats, split)
from .errors import DimensionMismatch
from .mlp import MlpModel, forward_batch
from .training import (TrainConfig, TrainReport, TrainingAlgorithm, train)

ERROR_THRESHOLD_M = 0.8


@dataclass
class EvalReport:
    """Summary of per-row localization errors on one test set."""

    average_error: float
    max_error: float
    pct_below_threshold: float
    n: int
    per_row_errors: list[float]
    threshold: float = ERROR_THRESHOLD_M

    def summary_dict(self) -> dict:
        return {
            "average_error_m": self.average_error,
            "max_error_m": self.max_error,
            "pct_below_0p8": self.pct_below_threshold,
            "n": self.n,
        }


def _as_xy(points) -> np.ndarray:
    seq = list(points)
    if seq and hasattr(seq[0], "x"):
        arr = np.array([[p.x, p.y] for p in seq], dtype=np.float64)
    else:
        arr = np.asarray(seq, dtype=np.float64)
    return arr.reshape(-1, 2) if arr.size else arr.reshape(0, 2)


def localization_error(estimates, truths,
                       threshold: float = ERROR_THRESHOLD_M) -> EvalReport:
    """Per-row Euclidean errors and their summary statistics."""
    est, tru = _as_xy(estimates), _as_xy(truths)
    if est.shape != tru.shape or est.shape[0] == 0:
        raise DimensionMismatch(
            f"estimate/truth shapes differ or are empty: {est.shape} vs {tru.shape}")
    errors = np.sqrt(((est - tru) ** 2).sum(axis=1))
    return EvalReport(
        average_error=float(errors.mean()),
        max_error=float(errors.max()),
        pct_below_threshold=float(100.0 * np.count_nonzero(errors < threshold)
                                  / errors.size),
        n=int(errors.size),
        per_row_errors=[float(e) for e in errors],
        threshold=threshold,
    )


def evaluate(model: MlpModel, test: Dataset,
             threshold: float = ERROR_THRESHOLD_M) -> EvalReport:
    """Forward-pass every test row and score against its target."""
    estimates = forward_batch(model, test.inputs)
    return localization_error(estimates, test.targets, threshold)


# -- experiment cells --------------------------------------------------------

@dataclass(frozen=True)
class ExperimentOptions:
    """Everything one cell needs besides (config, algorithm, seed)."""

    hidden_layers: tuple[int, ...] = (12, 12)
    samples_per_point: int = 25
    samples_per_unknown: int = 15
    train_fraction: float = 0.80
    max_epochs: int = 1000
    unknown_points: tuple = UNKNOWN_TEST_POINTS


@dataclass
class CellResult:
    config: AnchorConfig
    algorithm: TrainingAlgorithm
    seed: int
    known_eval: EvalReport
    unknown_eval: EvalReport
    train_report: TrainReport
    model: MlpModel

    @property
    def key(self) -> str:
        return f"{self.config.value}:{self.algorithm.value}:{self.seed}"


def run_cell(deployment: Deployment, channel: ChannelModel, grid: GridSpec,
             config: AnchorConfig, algorithm: TrainingAlgorithm, seed: int,
             options: ExperimentOptions = ExperimentOptions()) -> CellResult:
    """Generate data, train, and evaluate one experiment cell.

    The run seed drives the channel noise, the 80/20 split, the weight
    initialization, and the validation carve; channel noise stays paired
    across configurations because draws are keyed by anchor id.
    """
    dep = deployment.with_selection(config)
    chan = replace(channel, seed=seed)
    pool, unknown = generate_dataset(dep, chan, grid,
                                     options.samples_per_point,
                                     options.unknown_points,
                                     options.samples_per_unknown)
    train_set, known_test = split(pool, SplitSpec(options.train_fraction,
                                                  seed=seed))
    input_norm, output_norm = normalization_stats(train_set)
    model0 = MlpModel.initialize(
        [pool.anchor_count, *options.hidden_layers, 2],
        seed, input_norm, output_norm)
    cfg = TrainConfig(algorithm=algorithm, seed=seed,
                      max_epochs=options.max_epochs)
    trained, report = train(model0, train_set, cfg)
    return CellResult(
        config=config, algorithm=algorithm, seed=seed,
        known_eval=evaluate(trained, known_test),
        unknown_eval=evaluate(trained, unknown),
        train_report=report, model=trained)


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def _run_cells(deployment, channel, grid, cells, options, jobs):
    tasks = [(deployment, channel, grid, config, algorithm, seed, options)
             for config, algorithm, seed in cells]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, tasks))
    else:
        results = [_run_cell_args(t) for t in tasks]
    return results


@dataclass
class ExperimentReport:
    """Keyed cell results of a comparison or sweep."""

    kind: str  # "algorithm_comparison" or "anchor_sweep"
    cells: list[CellResult]

    def median_unknown_error(self, config: AnchorConfig,
                             algorithm: TrainingAlgorithm) -> float:
        values = [c.unknown_eval.average_error for c in self.cells
                  if c.config is config and c.algorithm is algorithm]
        return float(np.median(values))

    def median_unknown_pct(self, config: AnchorConfig,
                           algorithm: TrainingAlgorithm) -> float:
        values = [c.unknown_eval.pct_below_threshold for c in self.cells
                  if c.config is config and c.algorithm is algorithm]
        return float(np.median(values))

    def csv_lines(self) -> list[str]:
        lines = ["config,algorithm,seed,known_avg_m,known_max_m,"
                 "known_pct_below_0p8,unknown_avg_m,unknown_max_m,"
                 "unknown_pct_below_0p8,epochs_run,stop_reason,"
                 "final_train_mse,effective_parameters"]
        for c in sorted(self.cells, key=lambda c: c.key):
            gamma = c.train_report.effective_parameters
            lines.append(",".join([
                c.config.value, c.algorithm.value, str(c.seed),
                repr(c.known_eval.average_error), repr(c.known_eval.max_error),
                repr(c.known_eval.pct_below_threshold),
                repr(c.unknown_eval.average_error), repr(c.unknown_eval.max_error),
                repr(c.unknown_eval.pct_below_threshold),
                str(c.train_report.epochs_run), c.train_report.stop_reason.value,
                repr(c.train_report.final_train_mse),
                "" if gamma is None else repr(gamma),
            ]))
        return lines

    def json_doc(self) -> str:
        """Structured report for the plot subcommand; wall times excluded
        so the document is byte-identical across reruns."""
        cells = []
        for c in sorted(self.cells, key=lambda c: c.key):
            cells.append({
                "config": c.config.value,
                "algorithm": c.algorithm.value,
                "seed": c.seed,
                "known": c.known_eval.summary_dict(),
                "unknown": c.unknown_eval.summary_dict(),
                "train": {
                    "epochs_run": c.train_report.epochs_run,
                    "stop_reason": c.train_report.stop_reason.value,
                    "final_train_mse": c.train_report.final_train_mse,
                    "effective_parameters": c.train_report.effective_parameters,
                },
            })
        return json.dumps({"kind": self.kind, "cells": cells},
                          indent=2, sort_keys=True) + "\n"

    def times_doc(self) -> str:
        """Wall-time sidecar: cell key -> training seconds."""
        times = {c.key: c.train_report.wall_time
                 for c in sorted(self.cells, key=lambda c: c.key)}
        return json.dumps({"kind": self.kind + "_times", "seconds": times},
                          indent=2, sort_keys=True) + "\n"


ALL_ALGORITHMS = (TrainingAlgorithm.LM, TrainingAlgorithm.BR,
                  TrainingAlgorithm.RP, TrainingAlgorithm.SCG,
                  TrainingAlgorithm.GD)
ALL_CONFIGS = (AnchorConfig.TWO_A, AnchorConfig.TWO_B, AnchorConfig.THREE_A,
               AnchorConfig.THREE_B, AnchorConfig.FOUR, AnchorConfig.FIVE)


def algorithm_comparison(deployment: Deployment, channel: ChannelModel,
                         grid: GridSpec,
                         algorithms=ALL_ALGORITHMS,
                         seeds=(1, 2, 3, 4, 5),
                         config: AnchorConfig = AnchorConfig.FOUR,
                         options: ExperimentOptions = ExperimentOptions(),
                         jobs: int = 1) -> ExperimentReport:
    """Train the same network once per algorithm on identical data/seeds."""
    cells = [(config, algorithm, seed)
             for algorithm in algorithms for seed in seeds]
    return ExperimentReport("algorithm_comparison",
                            _run_cells(deployment, channel, grid, cells,
                                       options, jobs))


def anchor_sweep(deployment: Deployment, channel: ChannelModel, grid: GridSpec,
                 configs=ALL_CONFIGS,
                 algorithms=(TrainingAlgorithm.LM, TrainingAlgorithm.BR),
                 seeds=(1, 2, 3, 4, 5),
                 options: ExperimentOptions = ExperimentOptions(),
                 jobs: int = 1) -> ExperimentReport:
    """Regenerate paired-noise datasets and score every anchor configuration.

    The input layer width follows each configuration's anchor count; the
    unknown-position set never feeds any training run.
    """
    missing = {i for cfg in configs for i in cfg.ids} - \
        {i for i, _ in deployment.anchors}
    if missing:
        raise ValueError(f"deployment lacks anchors {sorted(missing)}")
    cells = [(config, algorithm, seed) for config in configs
             for algorithm in algorithms for seed in seeds]
    return ExperimentReport("anchor_sweep",
                            _run_cells(deployment, channel, grid, cells,
                                       options, jobs))
