"""Iterative shrinkage/thresholding baseline for the same training problem.

Linearizing the loss around the current decision values turns the proximal
subproblem into one soft-threshold per block:

    alpha_m <- ST_{s C}(alpha_m - s * grad_z)
    b       <- b - s * sum_i grad_z_i

with a scalar step s backtracked on the usual proximal-gradient
sufficient-decrease condition (the distance term measured in the block
K-norms).  Smooth losses only.  Used as an independent convergence oracle
and as the comparison point in benchmarks.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .duality import dual_objective, dual_projection
from .errors import ContractError, NumericalError
from .kernels import GramStack
from .losses import CURVATURE_BOUND, LossSpec, loss_grad, loss_value
from .prox import st_scale
from .solver import Diagnostics, MklModel, TraceRow, extract_model
from .state import SolverConfig, SolverState, GammaSchedule

MIN_STEP = 1e-14
STEP_RECOVERY = 1.5     # accepted steps may grow back toward the initial one


@dataclass
class IstState:
    """Iterate of the shrinkage/thresholding loop."""

    alpha: dict[int, np.ndarray]
    b: float
    step: float
    step0: float
    it: int
    objective: float
    z: np.ndarray                     # cached decision values K alpha + b


def lipschitz_step(stack: GramStack, spec: LossSpec, iters: int = 30) -> float:
    """1 / (curvature * lam_max(sum_m K_m^2)) estimated by power iteration."""
    kappa = CURVATURE_BOUND[spec.kind]
    n = stack.n_samples
    w = np.ones(n) / np.sqrt(n)
    lam = 1.0
    for _ in range(iters):
        w2 = np.zeros(n)
        for m in range(stack.n_kernels):
            w2 += stack.matvec(m, stack.matvec(m, w))
        lam = float(np.linalg.norm(w2))
        if lam == 0.0:
            return 1.0
        w = w2 / lam
    return 1.0 / (kappa * lam)


def ist_init(stack: GramStack, spec: LossSpec) -> IstState:
    step = lipschitz_step(stack, spec)
    z = np.zeros(stack.n_samples)
    return IstState(alpha={}, b=0.0, step=step, step0=step, it=0,
                    objective=loss_value(spec, z), z=z)


def ist_step(state: IstState, stack: GramStack, spec: LossSpec, C: float) -> IstState:
    """One accepted shrinkage step, halving the step size until the
    proximal-gradient majorization holds."""
    if spec.kind == "hinge":
        raise ContractError("shrinkage baseline requires a differentiable loss")
    g = loss_grad(spec, state.z)
    g_sum = float(g.sum())
    f_old = loss_value(spec, state.z)
    s = state.step
    while True:
        new_alpha: dict[int, np.ndarray] = {}
        dist2 = 0.0
        reg = 0.0
        z_new = None
        for m in range(stack.n_kernels):
            a = state.alpha.get(m)
            cand = (a - s * g) if a is not None else (-s * g)
            nrm = np.sqrt(stack.quad(m, cand))
            sc = st_scale(nrm, s * C)
            if sc > 0.0:
                a2 = cand * sc
                new_alpha[m] = a2
                reg += nrm - s * C
                d = a2 - a if a is not None else a2
            else:
                if a is None:
                    continue
                d = -a
            dist2 += stack.quad(m, d)
        b_new = state.b - s * g_sum
        dist2 += (b_new - state.b) ** 2
        z_new = np.full(stack.n_samples, b_new)
        for m, a2 in new_alpha.items():
            z_new += stack.matvec(m, a2)
        f_new = loss_value(spec, z_new)
        if f_new <= f_old + float(g @ (z_new - state.z)) + dist2 / (2.0 * s) + 1e-12:
            break
        s *= 0.5
        if s < MIN_STEP:
            raise NumericalError("shrinkage step size underflow")
    return IstState(
        alpha=new_alpha,
        b=b_new,
        step=min(s * STEP_RECOVERY, state.step0),
        step0=state.step0,
        it=state.it + 1,
        objective=f_new + C * reg,
        z=z_new,
    )


def ist_solve(stack: GramStack, y, spec: LossSpec | str, C: float,
              tol: float = 1e-9, max_iter: int = 20000,
              gap_tol: float | None = None, gap_every: int = 25) -> MklModel:
    """Iterate shrinkage steps until the relative objective decrease drops
    below ``tol`` (or, when ``gap_tol`` is set, until the projected duality
    gap reaches it, checked every ``gap_every`` iterations).

    Returns the same model type as the main solver, with a trace of
    objective values and periodic gap estimates.
    """
    if isinstance(spec, str):
        spec = LossSpec(spec, np.asarray(y, dtype=float))
    state = ist_init(stack, spec)
    diag = Diagnostics(solver="ist")
    t0 = perf_counter()
    converged = False
    reason = "max_iter"
    last_gap = np.inf
    while state.it < max_iter:
        prev = state.objective
        state = ist_step(state, stack, spec, C)
        gap = np.nan
        if gap_tol is not None and (state.it % gap_every == 0):
            gap = _ist_gap(state, stack, spec, C)
            last_gap = gap
            diag.trace.append(TraceRow(iter=state.it, primal=state.objective,
                                       dual=state.objective * (1 - gap),
                                       gap=gap,
                                       active_kernels=len(state.alpha),
                                       seconds=perf_counter() - t0))
            if gap <= gap_tol:
                converged = True
                reason = "gap_tol"
                break
        if prev - state.objective < tol * max(abs(state.objective), 1.0):
            converged = gap_tol is None
            reason = "objective_decrease" if converged else "objective_stall"
            break

    if gap_tol is not None and not np.isfinite(last_gap):
        last_gap = _ist_gap(state, stack, spec, C)
    diag.converged = converged
    diag.reason = reason
    diag.outer_iters = state.it
    diag.final_gap = last_gap if gap_tol is not None else np.nan
    diag.seconds = perf_counter() - t0
    if not diag.trace:
        diag.trace.append(TraceRow(iter=state.it, primal=state.objective,
                                   dual=np.nan, gap=np.nan,
                                   active_kernels=len(state.alpha),
                                   seconds=diag.seconds))

    solver_state = SolverState(alpha=state.alpha, b=state.b,
                               gamma=GammaSchedule.constant(stack.n_kernels, state.step),
                               outer_iter=state.it,
                               n_kernels=stack.n_kernels,
                               n_samples=stack.n_samples)
    cfg = SolverConfig(C=C)
    model = extract_model(solver_state, stack, spec, cfg, diag)
    if not model.active:
        msg = "trained model has no active kernels (C may be too large)"
        diag.warnings.append(msg)
        _warnings.warn(msg)
    return model


def _ist_gap(state: IstState, stack: GramStack, spec: LossSpec, C: float) -> float:
    """Relative gap with the natural dual candidate rho = -grad_z loss(z)."""
    rho = -loss_grad(spec, state.z)
    rho_t = dual_projection(rho, stack, C, spec)
    dual = dual_objective(rho_t, spec)
    primal = state.objective
    if primal == 0.0:
        return primal - dual
    return (primal - dual) / abs(primal)
