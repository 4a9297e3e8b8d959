"""Service handlers: the one place the train/predict/bench pipelines live.

Both the HTTP routes and the CLI call these functions, so the CLI stays a
thin client over the same request/response models.
"""

from __future__ import annotations

import math
import uuid

import numpy as np

from .. import bench as bench_mod
from ..data import Dataset, load, split, standardize
from ..errors import InputError
from ..ist import ist_solve
from ..kernels import BankConfig, build_kernel_bank, cross_gram
from ..losses import LossSpec
from ..model_io import model_from_dict, model_to_dict
from ..solver import (MklModel, TraceRow, c_correspondence, predict,
                      predict_on_data, train)
from ..state import SolverConfig
from . import schemas as S

# in-memory registry serving multi-client prediction by model id
MODEL_REGISTRY: dict[str, MklModel] = {}


def _dataset_from_request(req: S.TrainRequest) -> Dataset:
    if req.X is not None:
        return Dataset(X=np.asarray(req.X, dtype=float),
                       y=np.asarray(req.y, dtype=float), provenance="inline")
    return load(req.data_path, fmt=req.data_format, csv_header=req.csv_header)


def _scores_on_standardized(model: MklModel, X_std: np.ndarray) -> np.ndarray:
    """Decision values for features already in the training scale."""
    rows = {m: cross_gram(model.kernel_specs[m], X_std, model.train_X,
                          scale=model.scales[m]) for m in model.active}
    if not rows:
        return np.full(X_std.shape[0], model.b)
    return predict(model, rows)


def _bank_config(model: S.BankConfigModel | None) -> BankConfig | None:
    if model is None:
        return None
    kwargs = model.model_dump()
    if kwargs.get("bandwidths") is None:
        kwargs.pop("bandwidths")
    else:
        kwargs["bandwidths"] = tuple(kwargs["bandwidths"])
    if kwargs.get("degrees") is None:
        kwargs.pop("degrees")
    else:
        kwargs["degrees"] = tuple(kwargs["degrees"])
    cfg = BankConfig(**kwargs)
    cfg.validate()
    return cfg


def _trace_models(trace: list[TraceRow]) -> list[S.TraceRowModel]:
    out = []
    for row in trace:
        out.append(S.TraceRowModel(
            iter=row.iter,
            primal_obj=row.primal,
            dual_obj=None if _isnan(row.dual) else row.dual,
            rel_gap=None if _isnan(row.gap) else row.gap,
            active_kernels=row.active_kernels,
            seconds=row.seconds,
        ))
    return out


def _isnan(x) -> bool:
    try:
        return math.isnan(float(x))
    except (TypeError, ValueError):
        return True


def run_train(req: S.TrainRequest) -> S.TrainResponse:
    ds = _dataset_from_request(req)
    if req.split_fraction is not None:
        train_ds, test_ds = split(ds, req.split_fraction, req.seed)
        mean, std = train_ds.scaler
        Xtr = train_ds.X
    else:
        test_ds = None
        if req.standardize:
            Xtr, mean, std = standardize(ds.X)
        else:
            Xtr, mean, std = ds.X, None, None
        train_ds = Dataset(X=Xtr, y=ds.y, provenance=ds.provenance,
                           label_map=ds.label_map)

    bank_cfg = _bank_config(req.bank)
    stack = build_kernel_bank(Xtr, bank_cfg)
    spec = LossSpec(req.loss, train_ds.y)

    grid = req.C if isinstance(req.C, list) else [req.C]
    opts = req.options
    runs = []
    for C in grid:
        if req.solver == "spicy":
            cfg = SolverConfig(C=C, gamma_init=opts.gamma_init,
                               gamma_growth=opts.gamma_growth,
                               gamma_cap=opts.gamma_cap,
                               outer_tol=opts.outer_tol,
                               inner_tol=opts.inner_tol,
                               max_outer=opts.max_outer,
                               max_inner=opts.max_inner)
            model = train(stack, spec.y, spec, cfg)
        else:
            model = ist_solve(stack, spec.y, spec, C, tol=opts.ist_tol,
                              max_iter=opts.ist_max_iter, gap_tol=opts.outer_tol)
        model.train_X = Xtr
        model.feature_mean = mean
        model.feature_std = std
        model.label_map = ds.label_map

        accuracy = None
        if test_ds is not None and test_ds.n > 0 and req.loss in ("logistic", "hinge"):
            scores = _scores_on_standardized(model, test_ds.X)
            accuracy = float(np.mean(np.sign(scores) == test_ds.y))

        model_id = uuid.uuid4().hex[:12]
        MODEL_REGISTRY[model_id] = model
        d = model.diagnostics
        summary = S.TrainSummary(
            C=C, solver=req.solver, loss=req.loss,
            converged=d.converged, reason=d.reason, outer_iters=d.outer_iters,
            final_gap=None if _isnan(d.final_gap) else float(d.final_gap),
            active_kernels=model.n_active, seconds=d.seconds,
            accuracy=accuracy,
            c_squared_form=(c_correspondence(model, C) if model.active else 0.0),
            warnings=list(d.warnings),
        )
        runs.append(S.TrainRunResult(model_id=model_id, summary=summary,
                                     trace=_trace_models(d.trace),
                                     model_payload=model_to_dict(model)))
    return S.TrainResponse(runs=runs)


def run_predict(req: S.PredictRequest) -> S.PredictResponse:
    if req.model_id is not None:
        model = MODEL_REGISTRY.get(req.model_id)
        if model is None:
            raise InputError(f"unknown model_id {req.model_id!r}")
    else:
        model = model_from_dict(req.model_payload)

    if req.X is not None:
        X = np.asarray(req.X, dtype=float)
        y = np.asarray(req.y, dtype=float) if req.y is not None else None
    else:
        ds = load(req.data_path, fmt=req.data_format, csv_header=req.csv_header)
        X, y = ds.X, ds.y

    scores = predict_on_data(model, X)
    labels = None
    accuracy = None
    if model.loss in ("logistic", "hinge"):
        labels = np.sign(scores)
        labels[labels == 0] = 1.0
        if y is not None and np.all(np.isin(np.unique(y), [-1.0, 1.0])):
            accuracy = float(np.mean(labels == y))
    return S.PredictResponse(
        scores=[float(v) for v in scores],
        labels=[float(v) for v in labels] if labels is not None else None,
        accuracy=accuracy,
    )


def run_bench(req: S.BenchRequest) -> S.BenchResponse:
    plan = bench_mod.BenchPlan(
        axis=req.axis, values=tuple(req.values), reps=req.reps,
        solvers=tuple(req.solvers), loss=req.loss, C=req.C,
        n_samples=req.n_samples, n_kernels=req.n_kernels,
        n_features=req.n_features, seed=req.seed, tol=req.tol,
    )
    result = bench_mod.run_bench(plan)
    rows = [S.BenchRowModel(
        axis_value=r.axis_value, rep=r.rep, solver=r.solver, seed=r.seed,
        seconds=None if _isnan(r.seconds) else r.seconds,
        iterations=r.iterations,
        final_gap=None if _isnan(r.final_gap) else r.final_gap,
        active_kernels=r.active_kernels, converged=r.converged, status=r.status,
    ) for r in result.rows]
    aggs = [S.BenchAggregateModel(
        axis_value=a.axis_value, solver=a.solver, mean_seconds=a.mean_seconds,
        std_seconds=a.std_seconds, n=a.n,
    ) for a in result.aggregates]
    return S.BenchResponse(rows=rows, aggregates=aggs)
