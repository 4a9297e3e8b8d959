"""Primal/dual objectives, the dual feasibility projection and the gap.

The stopping certificate is the relative duality gap
(primal - dual) / |primal|.  The dual candidate comes from the inner
minimizer rho via two projections: scale into the intersection of the
K-norm balls, then center to the zero-sum hyperplane.  Centering can
slightly re-violate the norm constraints, so the dual value is a stopping
heuristic rather than a certified bound; the excess is reported so runs can
track it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GramStack
from .losses import LossSpec, hinge_conjugate_linear, loss_value

LOGISTIC_CLAMP = 1e-12


@dataclass
class GapReport:
    """Primal/dual pair and the relative gap at one iterate.

    ``absolute`` flags the degenerate primal == 0 case where the gap is the
    plain difference; ``linf_excess`` is the post-centering constraint
    excess max_m ||rho~||_K / C - 1 (clipped at 0) when requested.
    """

    primal: float
    dual: float
    relative_gap: float
    projected_rho: np.ndarray
    absolute: bool = False
    linf_excess: float = 0.0


def decision_values(state, stack: GramStack) -> np.ndarray:
    """K alpha + b over the nonzero blocks."""
    z = np.full(stack.n_samples, float(state.b))
    for m, a in state.alpha.items():
        z += stack.matvec(m, a)
    return z


def primal_objective(state, stack: GramStack, spec: LossSpec, C: float) -> float:
    """Loss at the decision values plus C times the sum of block K-norms."""
    z = decision_values(state, stack)
    reg = sum(np.sqrt(stack.quad(m, a)) for m, a in state.alpha.items())
    return loss_value(spec, z) + C * float(reg)


def _max_block_norm(rho: np.ndarray, stack: GramStack) -> float:
    """max_m ||rho||_{K_m}, skipping kernels whose eigenvalue bound already
    caps them below the running maximum."""
    l2 = float(np.linalg.norm(rho))
    if l2 == 0.0:
        return 0.0
    bounds = np.array([np.sqrt(stack.lam_bound(m)) for m in range(stack.n_kernels)]) * l2
    order = np.argsort(-bounds)
    best = 0.0
    for m in order:
        if bounds[m] <= best:
            break
        best = max(best, float(np.sqrt(stack.quad(int(m), rho))))
    return best


def dual_projection(rho, stack: GramStack, C: float, spec: LossSpec) -> np.ndarray:
    """Project rho toward dual feasibility: scale into the K-norm balls, then
    center to sum zero.  On the hinge path y*rho is clipped into [0, 1]
    before scaling and once more after centering."""
    rho = np.asarray(rho, dtype=float)
    if spec.kind == "hinge":
        rho = spec.y * np.clip(spec.y * rho, 0.0, 1.0)
    s = max(_max_block_norm(rho, stack) / C, 1.0)
    rho = rho / s
    rho = rho - rho.sum() / rho.shape[0]
    if spec.kind == "hinge":
        rho = spec.y * np.clip(spec.y * rho, 0.0, 1.0)
    return rho


def dual_objective(rho_tilde, spec: LossSpec) -> float:
    """Dual value at a (heuristically) feasible point.

    Smooth losses: minus the conjugate at -rho~, with the logistic argument
    clamped away from the entropy boundary.  Hinge: sum_i y_i rho~_i.
    """
    rho_tilde = np.asarray(rho_tilde, dtype=float)
    y = spec.y
    if spec.kind == "logistic":
        u = np.clip(y * rho_tilde, LOGISTIC_CLAMP, 1.0 - LOGISTIC_CLAMP)
        return -float(np.sum(u * np.log(u) + (1.0 - u) * np.log1p(-u)))
    if spec.kind == "squared":
        return -float(np.sum(-rho_tilde * y + rho_tilde * rho_tilde / 4.0))
    return -hinge_conjugate_linear(spec, rho_tilde)


def relative_gap(state, stack: GramStack, spec: LossSpec, C: float, rho,
                 check_excess: bool = False) -> GapReport:
    """Assemble the gap report at the current iterate and dual vector."""
    primal = primal_objective(state, stack, spec, C)
    rho_t = dual_projection(rho, stack, C, spec)
    dual = dual_objective(rho_t, spec)
    excess = 0.0
    if check_excess:
        excess = max(_max_block_norm(rho_t, stack) / C - 1.0, 0.0)
    if primal == 0.0:
        return GapReport(primal, dual, primal - dual, rho_t, absolute=True,
                         linf_excess=excess)
    return GapReport(primal, dual, (primal - dual) / abs(primal), rho_t,
                     linf_excess=excess)
