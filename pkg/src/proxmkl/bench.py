"""Scaling benchmark harness: sweep kernel count or sample size, time the
solvers, and tabulate per-run rows plus mean/std aggregates.

Wall time covers the solver call only; Gram construction happens outside
the timed region since the banks are precomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .data import standardize, synth_ringnorm
from .ist import ist_solve
from .kernels import random_kernel_bank
from .losses import LossSpec
from .solver import train
from .state import SolverConfig


@dataclass
class BenchPlan:
    """Sweep description: which axis grows, the values, and shared settings."""

    axis: str = "kernels"              # "kernels" | "samples"
    values: tuple[int, ...] = (50, 200, 800)
    reps: int = 3
    solvers: tuple[str, ...] = ("spicy",)
    loss: str = "logistic"
    C: float = 0.5
    n_samples: int = 200               # fixed when axis == "kernels"
    n_kernels: int = 20                # fixed when axis == "samples"
    n_features: int = 20
    seed: int = 0
    tol: float = 0.01
    max_outer: int = 60
    ist_max_iter: int = 20000
    ist_gap_every: int = 25


@dataclass
class BenchRow:
    axis_value: int
    rep: int
    solver: str
    seed: int
    seconds: float = np.nan
    iterations: int = 0
    final_gap: float = np.nan
    active_kernels: int = 0
    converged: bool = False
    status: str = "ok"

    CSV_HEADER = ("axis_value,rep,solver,seed,seconds,iterations,final_gap,"
                  "active_kernels,converged,status")

    def to_csv(self) -> str:
        return (f"{self.axis_value},{self.rep},{self.solver},{self.seed},"
                f"{self.seconds!r},{self.iterations},{self.final_gap!r},"
                f"{self.active_kernels},{int(self.converged)},{self.status}")


@dataclass
class BenchAggregate:
    axis_value: int
    solver: str
    mean_seconds: float
    std_seconds: float
    n: int

    CSV_HEADER = "axis_value,solver,mean_seconds,std_seconds,n"

    def to_csv(self) -> str:
        return (f"{self.axis_value},{self.solver},{self.mean_seconds!r},"
                f"{self.std_seconds!r},{self.n}")


@dataclass
class BenchResult:
    rows: list[BenchRow]
    aggregates: list[BenchAggregate]
    traces: dict[str, list] = field(default_factory=dict)


def _one_run(stack, spec, solver, plan: BenchPlan):
    t0 = perf_counter()
    if solver == "spicy":
        cfg = SolverConfig(C=plan.C, outer_tol=plan.tol, max_outer=plan.max_outer)
        model = train(stack, spec.y, spec, cfg)
    else:
        model = ist_solve(stack, spec.y, spec, plan.C, max_iter=plan.ist_max_iter,
                          gap_tol=plan.tol, gap_every=plan.ist_gap_every)
    dt = perf_counter() - t0
    return model, dt


def run_bench(plan: BenchPlan, progress=None) -> BenchResult:
    """Execute the sweep; failed runs are recorded and the sweep continues."""
    rows: list[BenchRow] = []
    traces: dict[str, list] = {}
    for value in plan.values:
        for rep in range(plan.reps):
            seed = plan.seed + 1000 * rep
            n = value if plan.axis == "samples" else plan.n_samples
            M = value if plan.axis == "kernels" else plan.n_kernels
            ds = synth_ringnorm(n, plan.n_features, seed=seed)
            Xs, _, _ = standardize(ds.X)
            stack = random_kernel_bank(Xs, M, seed=seed + 17)
            spec = LossSpec(plan.loss, ds.y)
            for solver in plan.solvers:
                row = BenchRow(axis_value=value, rep=rep, solver=solver, seed=seed)
                try:
                    model, dt = _one_run(stack, spec, solver, plan)
                    row.seconds = dt
                    row.iterations = model.diagnostics.outer_iters
                    row.final_gap = model.diagnostics.final_gap
                    row.active_kernels = model.n_active
                    row.converged = model.diagnostics.converged
                    traces[f"{solver}_m{M}_n{n}_rep{rep}"] = model.diagnostics.trace
                except MemoryError:
                    row.status = "failed: out of memory"
                except Exception as err:    # keep sweeping past per-run failures
                    row.status = f"failed: {err}"
                rows.append(row)
                if progress is not None:
                    progress(row)
            del stack
    return BenchResult(rows=rows, aggregates=aggregate(rows), traces=traces)


def aggregate(rows: list[BenchRow]) -> list[BenchAggregate]:
    """Mean and standard deviation of wall time per (axis value, solver)."""
    out = []
    keys = sorted({(r.axis_value, r.solver) for r in rows})
    for value, solver in keys:
        secs = [r.seconds for r in rows
                if r.axis_value == value and r.solver == solver and r.status == "ok"]
        if not secs:
            continue
        out.append(BenchAggregate(axis_value=value, solver=solver,
                                  mean_seconds=float(np.mean(secs)),
                                  std_seconds=float(np.std(secs)),
                                  n=len(secs)))
    return out


def rows_to_csv(rows: list[BenchRow]) -> str:
    return "\n".join([BenchRow.CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def aggregates_to_csv(aggs: list[BenchAggregate]) -> str:
    return "\n".join([BenchAggregate.CSV_HEADER] + [a.to_csv() for a in aggs]) + "\n"
