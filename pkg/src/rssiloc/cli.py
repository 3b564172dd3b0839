"""Command-line client for the localization toolkit.

Subcommands: gen-data, train, eval, sweep, infer, export, plot, serve.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Output files are written to a temp name and renamed on success, so a
failing command never leaves partial artifacts. The default output
directory may be set through the RSSILOC_OUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (AnchorConfig, ChannelModel, generate_dataset,
                      load_testbed_config, reference_deployment)
from .data import (SplitSpec, UNKNOWN_TEST_POINTS, normalization_stats,
                   read_csv, reference_grid, split, write_csv)
from .errors import (CorruptModel, DegenerateData, DimensionMismatch,
                     FormatError, OutOfRange, ParseError, SolveFailure)
from .evaluation import (ALL_ALGORITHMS, ALL_CONFIGS, ExperimentOptions,
                         algorithm_comparison, anchor_sweep, evaluate)
from .export import conformance_path, conformance_vectors, render_c_source
from .mlp import MlpModel, forward
from .modelio import load_model, model_bytes
from .plots import chart_documents
from .training import (StopReason, TrainConfig, TrainingAlgorithm,
                       report_lines, train)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (OSError, ParseError, DimensionMismatch, DegenerateData,
                FormatError, CorruptModel, OutOfRange)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1 and accepts
    negative-number lists like ``--rssi -50,-60,-70``."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        import re
        self._negative_number_matcher = re.compile(r"^-\d")

    def error(self, message):
        raise _UsageError(message)


def _atomic_write(path: Path, payload) -> Path:
    """Write bytes/text next to the target, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(payload, bytes) else "w"
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, mode) as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def _out_dir(args) -> Path:
    if getattr(args, "out_dir", None):
        return Path(args.out_dir)
    return Path(os.environ.get("RSSILOC_OUT_DIR", "."))


def _parse_hidden(text: str) -> list[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise _UsageError(f"--hidden expects comma-separated integers, got {text!r}")
    if not sizes or any(s < 1 for s in sizes):
        raise _UsageError("--hidden sizes must all be positive")
    return sizes


def _parse_config(name: str) -> AnchorConfig:
    try:
        return AnchorConfig.from_name(name)
    except ValueError as exc:
        raise _UsageError(str(exc))


def _parse_algo(name: str) -> TrainingAlgorithm:
    try:
        return TrainingAlgorithm(name.strip().lower())
    except ValueError:
        valid = ", ".join(a.value for a in TrainingAlgorithm)
        raise _UsageError(f"unknown algorithm {name!r}; valid: {valid}")


def _testbed(args):
    if getattr(args, "channel_config", None):
        return load_testbed_config(args.channel_config)
    return reference_deployment(), ChannelModel()


def _csv_text(dataset) -> str:
    import io
    buf = io.StringIO()
    write_csv(dataset, buf)
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------

def _cmd_gen_data(args) -> int:
    import dataclasses
    deployment, channel = _testbed(args)
    deployment = deployment.with_selection(_parse_config(args.config))
    channel = dataclasses.replace(channel, seed=args.seed)
    pool, unknown = generate_dataset(
        deployment, channel, reference_grid(), args.samples_per_point,
        UNKNOWN_TEST_POINTS, args.samples_per_unknown)
    out = _out_dir(args)
    written = [
        _atomic_write(out / "train_pool.csv", _csv_text(pool)),
        _atomic_write(out / "unknown_test.csv", _csv_text(unknown)),
    ]
    print(f"Generated {len(pool)} survey rows over {pool.point_count} points "
          f"and {len(unknown)} unknown-position rows with the "
          f"{deployment.selection.value} anchor configuration (seed "
          f"{args.seed}). Wrote: {', '.join(str(p) for p in written)}.")
    return EXIT_OK


def _progressed(report) -> bool:
    return bool(report.loss_trace) and \
        report.final_train_mse < report.loss_trace[0][0]


def _cmd_train(args) -> int:
    hidden = _parse_hidden(args.hidden)
    algorithm = _parse_algo(args.algo)
    try:
        split_spec = SplitSpec(args.train_fraction, seed=args.seed)
        cfg = TrainConfig(algorithm=algorithm, seed=args.seed,
                          max_epochs=args.max_epochs, goal_mse=args.goal_mse,
                          min_gradient=args.min_gradient,
                          validation_fraction=args.validation_fraction,
                          patience=args.patience)
    except ValueError as exc:
        raise _UsageError(str(exc))
    data = read_csv(args.data)
    train_set, holdout = split(data, split_spec)
    input_norm, output_norm = normalization_stats(train_set)
    model0 = MlpModel.initialize([data.anchor_count, *hidden, 2], args.seed,
                                 input_norm, output_norm)
    trained, report = train(model0, train_set, cfg)

    if report.stop_reason is StopReason.LAMBDA_OVERFLOW and not _progressed(report):
        print("training made no progress before the damping overflowed",
              file=sys.stderr)
        return EXIT_NUMERIC

    out = _out_dir(args)
    model_path = Path(args.out) if args.out else out / "model.mlpl"
    report_path = Path(args.report) if args.report else \
        model_path.with_suffix(".report.txt")
    written = [
        _atomic_write(model_path, model_bytes(trained)),
        _atomic_write(report_path, "\n".join(report_lines(report)) + "\n"),
        _atomic_write(report_path.with_suffix(".time"),
                      f"{report.wall_time!r}\n"),
    ]
    if args.test_out:
        written.append(_atomic_write(Path(args.test_out), _csv_text(holdout)))
    gamma = (f", effective parameters {report.effective_parameters:.1f}"
             if report.effective_parameters is not None else "")
    print(f"Trained a {'-'.join(map(str, model0.layer_sizes[1:]))} network "
          f"with {algorithm.value} on {len(train_set)} rows "
          f"({len(holdout)} held out): {report.epochs_run} epochs, stop "
          f"{report.stop_reason.value}, final train MSE "
          f"{report.final_train_mse:.3e}{gamma}. Wrote: "
          f"{', '.join(str(p) for p in written)}.")
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    data = read_csv(args.data)
    result = evaluate(model, data)
    if args.json:
        import json
        doc = dict(result.summary_dict(), per_row_errors=result.per_row_errors)
        _atomic_write(Path(args.json), json.dumps(doc, indent=2,
                                                  sort_keys=True) + "\n")
    print(f"Evaluated {result.n} rows: average error "
          f"{result.average_error:.4f} m, max {result.max_error:.4f} m, "
          f"{result.pct_below_threshold:.1f}% below "
          f"{result.threshold:.1f} m.")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    deployment, channel = _testbed(args)
    configs = tuple(_parse_config(c) for c in args.configs.split(",")) \
        if args.configs else ALL_CONFIGS
    algorithms = tuple(_parse_algo(a) for a in args.algos.split(","))
    seeds = _parse_seeds(args.seeds)
    options = ExperimentOptions(samples_per_point=args.samples_per_point,
                                samples_per_unknown=args.samples_per_unknown,
                                max_epochs=args.max_epochs)
    report = anchor_sweep(deployment, channel, reference_grid(),
                          configs=configs, algorithms=algorithms, seeds=seeds,
                          options=options, jobs=args.jobs)
    out = _out_dir(args)
    written = [
        _atomic_write(out / "sweep.csv", "\n".join(report.csv_lines()) + "\n"),
        _atomic_write(out / "sweep.json", report.json_doc()),
        _atomic_write(out / "sweep.times.json", report.times_doc()),
    ]
    print(f"Swept {len(configs)} anchor configurations x "
          f"{len(algorithms)} algorithms x {len(seeds)} seeds "
          f"({len(report.cells)} cells). Wrote: "
          f"{', '.join(str(p) for p in written)}.")
    return EXIT_OK


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise _UsageError(f"--seeds expects comma-separated integers, got {text!r}")
    if not seeds:
        raise _UsageError("--seeds must name at least one seed")
    return seeds


def _cmd_infer(args) -> int:
    try:
        values = [float(v) for v in args.rssi.split(",")]
    except ValueError:
        raise _UsageError(f"--rssi expects comma-separated numbers, got {args.rssi!r}")
    if args.server:
        import json
        import urllib.request
        body = json.dumps({"model_path": str(args.model),
                           "rssi_dbm": values}).encode()
        req = urllib.request.Request(
            args.server.rstrip("/") + "/infer", data=body,
            headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req) as resp:
            doc = json.loads(resp.read())
        print(f"{doc['x_m']:.4f} {doc['y_m']:.4f}")
        return EXIT_OK
    model = load_model(args.model)
    if len(values) != model.layer_sizes[0]:
        raise DimensionMismatch(
            f"model expects {model.layer_sizes[0]} RSSI values, got {len(values)}")
    position = forward(model, values)
    print(f"{position.x:.4f} {position.y:.4f}")
    return EXIT_OK


def _cmd_export(args) -> int:
    model = load_model(args.model)
    source = render_c_source(model, args.precision, args.symbol_prefix)
    table = conformance_vectors(model)
    out_path = Path(args.out)
    written = [
        _atomic_write(out_path, source),
        _atomic_write(conformance_path(out_path), _csv_text(table)),
    ]
    print(f"Exported {args.precision} source for the "
          f"{'-'.join(map(str, model.layer_sizes))} network with "
          f"{len(table)} conformance vectors. Wrote: "
          f"{', '.join(str(p) for p in written)}.")
    return EXIT_OK


def _cmd_plot(args) -> int:
    report_path = Path(args.report)
    report_text = report_path.read_text(encoding="utf-8")
    times_path = Path(args.times) if args.times else \
        report_path.with_suffix("").with_suffix(".times.json") \
        if report_path.name.endswith(".json") else None
    if times_path is None or not times_path.exists():
        times_text = None
    else:
        times_text = times_path.read_text(encoding="utf-8")
    charts = chart_documents(report_text, times_text)
    out = _out_dir(args)
    written = []
    for name, (svg, csv_text) in sorted(charts.items()):
        written.append(_atomic_write(out / f"{name}.svg", svg))
        written.append(_atomic_write(out / f"{name}.csv", csv_text))
    print(f"Rendered {len(charts)} chart(s). Wrote: "
          f"{', '.join(str(p) for p in written)}.")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="rssiloc",
                     description="RSSI fingerprint localization toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate synthetic survey datasets",
                       parents=[], add_help=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--config", default="four",
                   help="anchor configuration name (two_a, two_b, three_a, "
                        "three_b, four, five)")
    p.add_argument("--samples-per-point", type=int, default=25)
    p.add_argument("--samples-per-unknown", type=int, default=15)
    p.add_argument("--channel-config", help="testbed key = value file")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a localization network")
    p.add_argument("--data", required=True, help="survey dataset CSV")
    p.add_argument("--algo", default="br", help="lm, br, rp, scg or gd")
    p.add_argument("--hidden", default="12,12",
                   help="comma-separated hidden layer sizes")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--goal-mse", type=float, default=0.0)
    p.add_argument("--min-gradient", type=float, default=1e-7)
    p.add_argument("--validation-fraction", type=float, default=0.15)
    p.add_argument("--patience", type=int, default=6)
    p.add_argument("--out", help="model file path (default model.mlpl)")
    p.add_argument("--report", help="train report path")
    p.add_argument("--test-out", help="write the held-out split to this CSV")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="anchor-configuration sweep")
    p.add_argument("--configs", help="comma-separated subset (default all six)")
    p.add_argument("--algos", default="lm,br")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--samples-per-point", type=int, default=25)
    p.add_argument("--samples-per-unknown", type=int, default=15)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--channel-config")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("infer", help="single-shot position estimate")
    p.add_argument("--model", required=True)
    p.add_argument("--rssi", required=True,
                   help="comma-separated dBm readings, anchor-id order")
    p.add_argument("--server", help="POST to a running service instead")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("export", help="emit firmware-embeddable C source")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output .c path")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--symbol-prefix", default="locnet")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("plot", help="render SVG charts from a report")
    p.add_argument("--report", required=True, help="sweep/comparison JSON")
    p.add_argument("--times", help="wall-time sidecar JSON")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolveFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
