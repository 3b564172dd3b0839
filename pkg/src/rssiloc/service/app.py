"""FastAPI service wrapping the localization toolkit.

Intended for the multi-client side of the workflow: a trained model is
loaded once and many mobile clients post RSSI readings for position
estimates. Dataset generation, training, evaluation and export are also
exposed so batch jobs can be driven remotely; they run synchronously.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..channel import AnchorConfig, ChannelModel, generate_dataset, \
    reference_deployment
from ..data import (SplitSpec, UNKNOWN_TEST_POINTS, normalization_stats,
                    read_csv, reference_grid, split, write_csv)
from ..errors import RssilocError
from ..evaluation import evaluate
from ..export import conformance_vectors, render_c_source
from ..mlp import MlpModel, forward
from ..modelio import load_model, save_model
from ..training import TrainConfig, TrainingAlgorithm, train
from .schemas import (EvaluateRequest, EvaluateResponse, ExportRequest,
                      ExportResponse, GenerateDataRequest,
                      GenerateDataResponse, HealthResponse, InferRequest,
                      InferResponse, LoadModelRequest, ModelInfo,
                      TrainRequest, TrainResponse)


def _model_info(model_id: str, model: MlpModel) -> ModelInfo:
    return ModelInfo(model_id=model_id, layer_sizes=list(model.layer_sizes),
                     anchor_count=model.layer_sizes[0], seed=model.seed)


def create_app() -> FastAPI:
    app = FastAPI(title="rssiloc", version=__version__)
    models: dict[str, MlpModel] = {}

    def fail(status: int, exc: Exception):
        raise HTTPException(status_code=status, detail=str(exc))

    def load_from_path(path: str) -> MlpModel:
        file = Path(path)
        if not file.exists():
            raise HTTPException(status_code=404,
                                detail=f"model file {path!r} not found")
        try:
            return load_model(file)
        except RssilocError as exc:
            fail(400, exc)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/models/load", response_model=ModelInfo)
    def load(request: LoadModelRequest):
        model = load_from_path(request.path)
        model_id = hashlib.sha256(Path(request.path).read_bytes()).hexdigest()[:16]
        models[model_id] = model
        return _model_info(model_id, model)

    @app.get("/models", response_model=list[ModelInfo])
    def list_models():
        return [_model_info(mid, m) for mid, m in sorted(models.items())]

    @app.post("/infer", response_model=InferResponse)
    def infer(request: InferRequest):
        if request.model_id is not None:
            model = models.get(request.model_id)
            if model is None:
                raise HTTPException(status_code=404,
                                    detail=f"unknown model id {request.model_id!r}")
        elif request.model_path is not None:
            model = load_from_path(request.model_path)
        else:
            raise HTTPException(status_code=400,
                                detail="provide model_id or model_path")
        try:
            position = forward(model, request.rssi_dbm)
        except RssilocError as exc:
            fail(400, exc)
        return InferResponse(x_m=position.x, y_m=position.y)

    @app.post("/datasets/generate", response_model=GenerateDataResponse)
    def gen_data(request: GenerateDataRequest):
        try:
            config = AnchorConfig.from_name(request.config)
        except ValueError as exc:
            fail(400, exc)
        deployment = reference_deployment(config)
        channel = ChannelModel(seed=request.seed)
        try:
            pool, unknown = generate_dataset(
                deployment, channel, reference_grid(),
                request.samples_per_point, UNKNOWN_TEST_POINTS,
                request.samples_per_unknown)
        except RssilocError as exc:
            fail(400, exc)
        out = Path(request.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pool_path, unknown_path = out / "train_pool.csv", out / "unknown_test.csv"
        write_csv(pool, pool_path)
        write_csv(unknown, unknown_path)
        return GenerateDataResponse(
            train_pool_path=str(pool_path), unknown_test_path=str(unknown_path),
            train_rows=len(pool), unknown_rows=len(unknown),
            point_count=pool.point_count)

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(request: TrainRequest):
        data_file = Path(request.data_path)
        if not data_file.exists():
            raise HTTPException(status_code=404,
                                detail=f"dataset {request.data_path!r} not found")
        try:
            algorithm = TrainingAlgorithm(request.algorithm.lower())
        except ValueError:
            raise HTTPException(status_code=400,
                                detail=f"unknown algorithm {request.algorithm!r}")
        try:
            data = read_csv(data_file)
            train_set, _ = split(data, SplitSpec(request.train_fraction,
                                                 seed=request.seed))
            input_norm, output_norm = normalization_stats(train_set)
            model0 = MlpModel.initialize(
                [data.anchor_count, *request.hidden_layers, 2],
                request.seed, input_norm, output_norm)
            cfg = TrainConfig(algorithm=algorithm, seed=request.seed,
                              max_epochs=request.max_epochs)
            trained, report = train(model0, train_set, cfg)
        except (RssilocError, ValueError) as exc:
            fail(400, exc)
        model_path = Path(request.model_out) if request.model_out \
            else data_file.with_name("model.mlpl")
        save_model(trained, model_path)
        val = report.final_validation_mse
        return TrainResponse(
            model_path=str(model_path), epochs_run=report.epochs_run,
            stop_reason=report.stop_reason.value,
            final_train_mse=report.final_train_mse,
            final_validation_mse=None if math.isnan(val) else val,
            effective_parameters=report.effective_parameters,
            wall_time_s=report.wall_time)

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate_endpoint(request: EvaluateRequest):
        model = load_from_path(request.model_path)
        data_file = Path(request.data_path)
        if not data_file.exists():
            raise HTTPException(status_code=404,
                                detail=f"dataset {request.data_path!r} not found")
        try:
            result = evaluate(model, read_csv(data_file))
        except RssilocError as exc:
            fail(400, exc)
        return EvaluateResponse(
            average_error_m=result.average_error, max_error_m=result.max_error,
            pct_below_0p8=result.pct_below_threshold, n=result.n)

    @app.post("/export", response_model=ExportResponse)
    def export_endpoint(request: ExportRequest):
        model = load_from_path(request.model_path)
        if request.precision not in ("f32", "f64"):
            raise HTTPException(status_code=400,
                                detail="precision must be 'f32' or 'f64'")
        import io
        buf = io.StringIO()
        write_csv(conformance_vectors(model), buf)
        return ExportResponse(
            source=render_c_source(model, request.precision,
                                   request.symbol_prefix),
            conformance_csv=buf.getvalue())

    return app
