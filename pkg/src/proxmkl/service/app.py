"""FastAPI application exposing train / predict / bench endpoints."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (ConfigError, ContractError, ConvergenceError, InputError,
                      NumericalError, ProxMklError)
from . import handlers
from . import schemas as S

app = FastAPI(
    title="proxmkl",
    description="Sparse multiple kernel learning as a service: proximal "
                "dual solver, shrinkage baseline, and scaling benchmarks.",
    version="0.1.0",
)


@app.exception_handler(ProxMklError)
async def _package_error(request: Request, exc: ProxMklError):
    if isinstance(exc, (InputError, ConfigError, ContractError)):
        return JSONResponse(status_code=400, content={"detail": str(exc)})
    if isinstance(exc, (NumericalError, ConvergenceError)):
        return JSONResponse(status_code=500,
                            content={"detail": str(exc), "kind": "numerical"})
    return JSONResponse(status_code=500, content={"detail": str(exc)})


@app.get("/health", response_model=S.HealthResponse)
def health():
    return S.HealthResponse(status="ok", version=app.version,
                            models_loaded=len(handlers.MODEL_REGISTRY))


@app.post("/train", response_model=S.TrainResponse)
def train_endpoint(req: S.TrainRequest):
    return handlers.run_train(req)


@app.post("/predict", response_model=S.PredictResponse)
def predict_endpoint(req: S.PredictRequest):
    return handlers.run_predict(req)


@app.post("/bench", response_model=S.BenchResponse)
def bench_endpoint(req: S.BenchRequest):
    return handlers.run_bench(req)


@app.get("/models")
def list_models():
    return {"models": sorted(handlers.MODEL_REGISTRY)}
