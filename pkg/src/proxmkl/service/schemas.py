"""Pydantic request/response models for the training service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator


class BankConfigModel(BaseModel):
    mode: Literal["grid", "random"] = "grid"
    bandwidths: Optional[list[float]] = None
    degrees: Optional[list[int]] = None
    subset_policy: Literal["per_feature_and_joint", "joint_only"] = "per_feature_and_joint"
    jitter: float = 1e-8
    gaussian_form: Literal["half", "plain"] = "half"
    n_kernels: int = 50
    seed: int = 0


class SolverOptions(BaseModel):
    gamma_init: float = 1.0
    gamma_growth: float = 2.0
    gamma_cap: float = 1e8
    outer_tol: float = 0.01
    inner_tol: float = 1e-6
    max_outer: int = 60
    max_inner: int = 100
    ist_tol: float = 1e-9
    ist_max_iter: int = 20000


class TrainRequest(BaseModel):
    X: Optional[list[list[float]]] = None
    y: Optional[list[float]] = None
    data_path: Optional[str] = None
    data_format: Literal["libsvm", "csv"] = "libsvm"
    csv_header: bool = False
    loss: Literal["logistic", "hinge", "squared"] = "logistic"
    C: Union[float, list[float]] = 0.05
    solver: Literal["spicy", "ist"] = "spicy"
    split_fraction: Optional[float] = None
    seed: int = 0
    standardize: bool = True
    bank: Optional[BankConfigModel] = None
    options: SolverOptions = Field(default_factory=SolverOptions)

    @model_validator(mode="after")
    def _check_source(self):
        inline = self.X is not None and self.y is not None
        if not inline and self.data_path is None:
            raise ValueError("provide either inline X and y or data_path")
        cs = self.C if isinstance(self.C, list) else [self.C]
        if any(c <= 0 for c in cs):
            raise ValueError("C must be positive")
        return self


class TraceRowModel(BaseModel):
    iter: int
    primal_obj: float
    dual_obj: Optional[float] = None
    rel_gap: Optional[float] = None
    active_kernels: int
    seconds: float


class TrainSummary(BaseModel):
    C: float
    solver: str
    loss: str
    converged: bool
    reason: str
    outer_iters: int
    final_gap: Optional[float] = None
    active_kernels: int
    seconds: float
    accuracy: Optional[float] = None
    c_squared_form: Optional[float] = None
    warnings: list[str] = Field(default_factory=list)


class TrainRunResult(BaseModel):
    model_id: str
    summary: TrainSummary
    trace: list[TraceRowModel]
    model_payload: dict


class TrainResponse(BaseModel):
    runs: list[TrainRunResult]


class PredictRequest(BaseModel):
    model_id: Optional[str] = None
    model_payload: Optional[dict] = None
    X: Optional[list[list[float]]] = None
    y: Optional[list[float]] = None
    data_path: Optional[str] = None
    data_format: Literal["libsvm", "csv"] = "libsvm"
    csv_header: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.model_id is None and self.model_payload is None:
            raise ValueError("provide model_id or model_payload")
        if self.X is None and self.data_path is None:
            raise ValueError("provide inline X or data_path")
        return self


class PredictResponse(BaseModel):
    scores: list[float]
    labels: Optional[list[float]] = None
    accuracy: Optional[float] = None


class BenchRequest(BaseModel):
    axis: Literal["kernels", "samples"] = "kernels"
    values: list[int] = Field(default_factory=lambda: [50, 200, 800])
    reps: int = 3
    solvers: list[Literal["spicy", "ist"]] = Field(default_factory=lambda: ["spicy"])
    loss: Literal["logistic", "squared"] = "logistic"
    C: float = 0.5
    n_samples: int = 200
    n_kernels: int = 20
    n_features: int = 20
    seed: int = 0
    tol: float = 0.01


class BenchRowModel(BaseModel):
    axis_value: int
    rep: int
    solver: str
    seed: int
    seconds: Optional[float] = None
    iterations: int = 0
    final_gap: Optional[float] = None
    active_kernels: int = 0
    converged: bool = False
    status: str = "ok"


class BenchAggregateModel(BaseModel):
    axis_value: int
    solver: str
    mean_seconds: float
    std_seconds: float
    n: int


class BenchResponse(BaseModel):
    rows: list[BenchRowModel]
    aggregates: list[BenchAggregateModel]


class HealthResponse(BaseModel):
    status: str
    version: str
    models_loaded: int
