"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class LoadModelRequest(BaseModel):
    path: str


class ModelInfo(BaseModel):
    model_id: str
    layer_sizes: list[int]
    anchor_count: int
    seed: int


class InferRequest(BaseModel):
    rssi_dbm: list[float]
    model_id: str | None = None
    model_path: str | None = None


class InferResponse(BaseModel):
    x_m: float
    y_m: float


class GenerateDataRequest(BaseModel):
    seed: int = 1
    config: str = "four"
    samples_per_point: int = Field(default=25, ge=1)
    samples_per_unknown: int = Field(default=15, ge=1)
    out_dir: str = "."


class GenerateDataResponse(BaseModel):
    train_pool_path: str
    unknown_test_path: str
    train_rows: int
    unknown_rows: int
    point_count: int


class TrainRequest(BaseModel):
    data_path: str
    algorithm: str = "br"
    hidden_layers: list[int] = [12, 12]
    seed: int = 1
    train_fraction: float = Field(default=0.8, gt=0.0, lt=1.0)
    max_epochs: int = Field(default=1000, ge=1)
    model_out: str | None = None


class TrainResponse(BaseModel):
    model_path: str
    epochs_run: int
    stop_reason: str
    final_train_mse: float
    final_validation_mse: float | None
    effective_parameters: float | None
    wall_time_s: float


class EvaluateRequest(BaseModel):
    model_path: str
    data_path: str


class EvaluateResponse(BaseModel):
    average_error_m: float
    max_error_m: float
    pct_below_0p8: float
    n: int


class ExportRequest(BaseModel):
    model_path: str
    precision: str = "f64"
    symbol_prefix: str = "locnet"


class ExportResponse(BaseModel):
    source: str
    conformance_csv: str
