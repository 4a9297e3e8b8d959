"""Versioned model (de)serialization.

The file stores everything prediction needs to rebuild test Gram blocks
exactly as at training time: kernel specs, trace-normalization constants,
the standardized training points and the feature scaler.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError
from .kernels import KernelSpec
from .solver import Diagnostics, MklModel, TraceRow

FORMAT_VERSION = 1


def model_to_dict(model: MklModel) -> dict:
    for m in model.active:
        if model.kernel_specs.get(m) is None:
            raise ContractError(f"active kernel {m} has no spec; a model built "
                                "from raw fixture matrices cannot be serialized")
    d = {
        "format_version": FORMAT_VERSION,
        "loss": model.loss,
        "C": model.C,
        "b": model.b,
        "active": list(model.active),
        "blocks": [
            {
                "index": m,
                "spec": model.kernel_specs[m].to_dict(),
                "scale": model.scales[m],
                "alpha": model.alpha[m].tolist(),
                "weight": model.weights[m],
                "norm": model.block_norms[m],
            }
            for m in model.active
        ],
        "diagnostics": {
            "converged": model.diagnostics.converged,
            "reason": model.diagnostics.reason,
            "outer_iters": model.diagnostics.outer_iters,
            "final_gap": _none_if_nan(model.diagnostics.final_gap),
            "seconds": model.diagnostics.seconds,
            "solver": model.diagnostics.solver,
            "warnings": model.diagnostics.warnings,
        },
        "train_X": model.train_X.tolist() if model.train_X is not None else None,
        "feature_mean": (model.feature_mean.tolist()
                         if model.feature_mean is not None else None),
        "feature_std": (model.feature_std.tolist()
                        if model.feature_std is not None else None),
        "label_map": ({str(k): v for k, v in model.label_map.items()}
                      if model.label_map else None),
    }
    return d


def model_from_dict(d: dict) -> MklModel:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported model format version {version!r}")
    blocks = d["blocks"]
    active = [blk["index"] for blk in blocks]
    diag_d = d.get("diagnostics", {})
    diag = Diagnostics(
        converged=diag_d.get("converged", False),
        reason=diag_d.get("reason", ""),
        outer_iters=diag_d.get("outer_iters", 0),
        final_gap=(diag_d.get("final_gap") if diag_d.get("final_gap") is not None
                   else np.nan),
        seconds=diag_d.get("seconds", 0.0),
        solver=diag_d.get("solver", "spicy"),
        warnings=list(diag_d.get("warnings", [])),
    )
    return MklModel(
        alpha={blk["index"]: np.asarray(blk["alpha"], dtype=float) for blk in blocks},
        b=float(d["b"]),
        active=active,
        weights={blk["index"]: float(blk["weight"]) for blk in blocks},
        block_norms={blk["index"]: float(blk["norm"]) for blk in blocks},
        loss=d["loss"],
        C=float(d["C"]),
        kernel_specs={blk["index"]: KernelSpec.from_dict(blk["spec"])
                      for blk in blocks},
        scales={blk["index"]: float(blk["scale"]) for blk in blocks},
        diagnostics=diag,
        train_X=(np.asarray(d["train_X"], dtype=float)
                 if d.get("train_X") is not None else None),
        feature_mean=(np.asarray(d["feature_mean"], dtype=float)
                      if d.get("feature_mean") is not None else None),
        feature_std=(np.asarray(d["feature_std"], dtype=float)
                     if d.get("feature_std") is not None else None),
        label_map=({float(k): v for k, v in d["label_map"].items()}
                   if d.get("label_map") else None),
    )


def save_model(model: MklModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> MklModel:
    path = Path(path)
    if not path.exists():
        raise InputError(f"model file {path} does not exist")
    return model_from_dict(json.loads(path.read_text()))


def trace_to_csv(trace: list[TraceRow]) -> str:
    return "\n".join([TraceRow.CSV_HEADER] + [row.to_csv() for row in trace]) + "\n"


def _none_if_nan(x):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else x
