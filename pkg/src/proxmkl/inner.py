"""Inner minimization of the smoothed dual objective.

For fixed proximal centers (alpha, b, and for the hinge loss xi, zeta) and
penalties gamma, the outer step requires the minimizer rho* of

    phi(rho) = data(rho)
             + sum_m ||ST_{gam_m C}(alpha_m + gam_m rho)||_{K_m}^2 / (2 gam_m)
             + (b + gam_b sum_i rho_i)^2 / (2 gam_b)

where data(rho) is the loss conjugate at -rho for smooth losses, and for the
hinge loss the linear term -y.rho plus the squared-hinge slack penalties.
phi is convex and differentiable; we minimize it with a damped Newton method
and an Armijo backtracking line search.

Only kernels whose thresholded block is nonzero (the active set) contribute
to the gradient and Hessian, and during backtracking the block norms are
needed only on kernels active at one of the segment endpoints; everything
else is screened out with a cheap norm bound.  This is what makes the cost
per iteration scale with the number of active kernels rather than with the
bank size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConvergenceError, NumericalError
from .kernels import GramStack
from .losses import LossSpec, conjugate_eval, hinge_conjugate_linear
from .state import SolverConfig, SolverState

# Newton decrements below this times (1 + |phi|) cannot be certified as
# descent in float64; the iterate is then accepted as converged.
RESOLUTION_EPS = 1e-14


@dataclass
class DualIterate:
    """Result of one inner solve: the dual vector plus reusable caches."""

    rho: np.ndarray
    active_set: list[int]
    k_v: dict[int, np.ndarray]        # K_m (alpha_m + gam_m rho) for active m
    k_alpha: dict[int, np.ndarray]    # K_m alpha_m for nonzero blocks
    grad_norm: float
    n_iter: int
    converged: bool
    at_resolution: bool = False
    stats: list[dict] | None = None


def initial_rho(spec: LossSpec) -> np.ndarray:
    """Cold-start dual point: u = y*rho = 1/2 for logistic, zero otherwise."""
    if spec.kind == "logistic":
        return 0.5 * spec.y
    return np.zeros(spec.n)


def project_warm_start(spec: LossSpec, rho: np.ndarray,
                       margin: float = 1e-6) -> np.ndarray:
    """Pull a previous rho* strictly inside the logistic conjugate domain."""
    if spec.kind != "logistic":
        return rho.copy()
    u = np.clip(spec.y * rho, margin, 1.0 - margin)
    return spec.y * u


class AugLagrangian:
    """The smoothed dual objective for one outer iteration.

    Precomputes the per-block quantities that stay fixed while rho moves:
    K_m alpha_m, the block K-norms, and the eigenvalue bounds used for
    screening.
    """

    def __init__(self, state: SolverState, spec: LossSpec, stack: GramStack, C: float):
        if stack.n_samples != spec.n:
            raise NumericalError(f"stack has {stack.n_samples} samples, labels {spec.n}")
        self.state = state
        self.spec = spec
        self.stack = stack
        self.C = float(C)
        self.M = stack.n_kernels
        self.N = stack.n_samples
        self.gam = state.gamma.kernel
        self.gam_b = state.gamma.bias
        self.alpha = state.alpha
        self.b = state.b
        self.y = spec.y
        self.thr = self.gam * self.C
        self.thr2 = self.thr ** 2
        self.sqrt_lam = np.sqrt([stack.lam_bound(m) for m in range(self.M)])
        self.anorm = np.zeros(self.M)
        self.k_alpha: dict[int, np.ndarray] = {}
        for m, a in state.alpha.items():
            ka = stack.matvec(m, a)
            self.k_alpha[m] = ka
            self.anorm[m] = np.sqrt(max(float(a @ ka), 0.0))
        if spec.kind == "hinge":
            self.xi = state.xi
            self.zeta = state.zeta
            self.gam_xi = state.gamma.xi
            self.gam_zeta = state.gamma.zeta

    # -- block geometry ------------------------------------------------

    def v_block(self, m: int, rho: np.ndarray) -> np.ndarray:
        """The pre-threshold vector alpha_m + gam_m * rho."""
        if m in self.alpha:
            return self.alpha[m] + self.gam[m] * rho
        return self.gam[m] * rho

    def screen(self, rho: np.ndarray) -> np.ndarray:
        """Exact ||v_m||_K^2 wherever the cheap bound cannot prove inactivity.

        Returns an (M,) array; NaN marks blocks proven inactive by
        ||alpha_m||_K + gam_m sqrt(lam_max) ||rho||_2 <= gam_m C.
        """
        l2 = float(np.linalg.norm(rho))
        bound = self.anorm + self.gam * self.sqrt_lam * l2
        out = np.full(self.M, np.nan)
        for m in np.where(bound > self.thr)[0]:
            out[m] = self.stack.quad(m, self.v_block(m, rho))
        return out

    def active_from(self, norms2: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(norms2 > self.thr2)[0]

    # -- data-side terms (loss conjugate / hinge linear + slacks) -------

    def data_value_safe(self, rho: np.ndarray) -> float:
        """Data term; +inf outside the logistic conjugate domain."""
        if self.spec.kind == "logistic":
            u = self.y * rho
            if u.min() <= 0.0 or u.max() >= 1.0:
                return np.inf
            return float(np.sum(u * np.log(u) + (1.0 - u) * np.log1p(-u)))
        if self.spec.kind == "squared":
            return float(np.sum(-rho * self.y + rho * rho / 4.0))
        return hinge_conjugate_linear(self.spec, rho) + self._slack_value(rho)

    def data_grad(self, rho: np.ndarray) -> np.ndarray:
        if self.spec.kind == "hinge":
            u = self.y * rho
            ax = self.xi - self.gam_xi * (1.0 - u)
            az = self.zeta - self.gam_zeta * u
            return (-self.y + self.y * np.maximum(ax, 0.0)
                    - self.y * np.maximum(az, 0.0))
        return conjugate_eval(self.spec, rho).gradient

    def data_hess_diag(self, rho: np.ndarray) -> np.ndarray:
        if self.spec.kind == "hinge":
            u = self.y * rho
            ax = self.xi - self.gam_xi * (1.0 - u)
            az = self.zeta - self.gam_zeta * u
            return self.gam_xi * (ax > 0.0) + self.gam_zeta * (az > 0.0)
        return conjugate_eval(self.spec, rho).hessian_diag

    def _slack_value(self, rho: np.ndarray) -> float:
        u = self.y * rho
        ax = np.maximum(self.xi - self.gam_xi * (1.0 - u), 0.0)
        az = np.maximum(self.zeta - self.gam_zeta * u, 0.0)
        return float(np.sum(ax * ax) / (2.0 * self.gam_xi)
                     + np.sum(az * az) / (2.0 * self.gam_zeta))

    # -- assembled objective pieces -------------------------------------

    def bias_value(self, rho_sum: float) -> float:
        r = self.b + self.gam_b * rho_sum
        return r * r / (2.0 * self.gam_b)

    def st_value(self, norms2: np.ndarray) -> float:
        act = self.active_from(norms2)
        if act.size == 0:
            return 0.0
        n = np.sqrt(norms2[act])
        return float(np.sum((n - self.thr[act]) ** 2 / (2.0 * self.gam[act])))

    def value(self, rho: np.ndarray) -> float:
        """phi(rho); raises ConjugateDomainError outside the logistic domain."""
        if self.spec.smooth_conjugate:
            data = conjugate_eval(self.spec, rho).value
        else:
            data = hinge_conjugate_linear(self.spec, rho) + self._slack_value(rho)
        return data + self.st_value(self.screen(rho)) + self.bias_value(float(rho.sum()))

    def gradient(self, rho: np.ndarray, norms2: np.ndarray | None = None,
                 with_cache: bool = False):
        """grad phi(rho); exactly one kernel-block product per active kernel."""
        if norms2 is None:
            norms2 = self.screen(rho)
        g = self.data_grad(rho) + (self.b + self.gam_b * float(rho.sum()))
        k_v: dict[int, np.ndarray] = {}
        act = self.active_from(norms2)
        for m in act:
            kv = self.gam[m] * self.stack.matvec(m, rho)
            if m in self.k_alpha:
                kv = kv + self.k_alpha[m]
            k_v[m] = kv
            g = g + (1.0 - self.thr[m] / np.sqrt(norms2[m])) * kv
        if with_cache:
            return g, act, k_v
        return g

    def hessian(self, rho: np.ndarray, norms2: np.ndarray | None = None,
                k_v: dict[int, np.ndarray] | None = None) -> np.ndarray:
        """Hessian of phi; reuses cached products K_m v_m when provided."""
        if norms2 is None:
            norms2 = self.screen(rho)
        H = np.diag(self.data_hess_diag(rho)) + self.gam_b
        act = self.active_from(norms2)
        rows = []
        for m in act:
            nrm = float(np.sqrt(norms2[m]))
            q = self.thr[m] / nrm
            H += self.gam[m] * (1.0 - q) * self.stack.values(m)
            kv = k_v[m] if k_v is not None and m in k_v else (
                self.gam[m] * self.stack.matvec(m, rho)
                + (self.k_alpha[m] if m in self.k_alpha else 0.0))
            rows.append(np.sqrt(self.gam[m] * q) / nrm * kv)
        if rows:
            P = np.asarray(rows)
            H += P.T @ P
        return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# public single-call wrappers


def al_objective(rho, state: SolverState, spec: LossSpec, stack: GramStack,
                 C: float) -> float:
    """Smoothed dual objective at rho (fresh evaluation, no caching)."""
    return AugLagrangian(state, spec, stack, C).value(np.asarray(rho, dtype=float))


def al_gradient(rho, state: SolverState, spec: LossSpec, stack: GramStack,
                C: float) -> np.ndarray:
    """Gradient of the smoothed dual objective at rho."""
    return AugLagrangian(state, spec, stack, C).gradient(np.asarray(rho, dtype=float))


def al_hessian(rho, state: SolverState, spec: LossSpec, stack: GramStack,
               C: float) -> np.ndarray:
    """Hessian of the smoothed dual objective at rho (undamped)."""
    return AugLagrangian(state, spec, stack, C).hessian(np.asarray(rho, dtype=float))


# ---------------------------------------------------------------------------
# Newton solver


def _factor_with_damping(H: np.ndarray, config: SolverConfig, context: dict):
    """Cholesky of H, adding lam*I escalated tenfold on failure."""
    if not np.all(np.isfinite(H)):
        raise NumericalError("non-finite Hessian", diagnostics=context)
    try:
        return cho_factor(H, lower=True)
    except LinAlgError:
        pass
    n = H.shape[0]
    lam = config.hessian_damping
    if lam is None:
        lam = 1e-8 * float(np.trace(H)) / n
    lam = max(lam, np.finfo(float).tiny)
    eye = np.eye(n)
    while lam <= config.damping_max:
        try:
            return cho_factor(H + lam * eye, lower=True)
        except LinAlgError:
            lam *= 10.0
    raise NumericalError(
        f"Hessian factorization failed even with damping {config.damping_max}",
        diagnostics=context)


def newton_inner(state: SolverState, spec: LossSpec, stack: GramStack,
                 config: SolverConfig, rho0: np.ndarray | None = None) -> DualIterate:
    """Minimize the smoothed dual objective with a damped Newton method.

    Iterates until the gradient max-norm drops below ``config.inner_tol`` or
    the Newton decrement falls under float64 resolution of the objective.
    Steps are chosen by Armijo backtracking; candidates violating the
    logistic conjugate domain are rejected.  During backtracking the block
    norms are re-evaluated only on kernels active at one of the segment
    endpoints, which convexity shows is exhaustive.

    Raises ConvergenceError when ``max_inner`` is exhausted and
    NumericalError when the line search stalls below the minimum step.
    """
    prob = AugLagrangian(state, spec, stack, config.C)
    rho = np.array(rho0, dtype=float) if rho0 is not None else initial_rho(spec)
    if spec.kind == "logistic":
        rho = project_warm_start(spec, rho)

    stats: list[dict] | None = [] if config.instrument else None
    norms2 = prob.screen(rho)
    for it in range(config.max_inner):
        snap = stack.counter.snapshot()
        g, act, k_v = prob.gradient(rho, norms2, with_cache=True)
        grad_norm = float(np.abs(g).max())
        if stats is not None:
            mv, qd = stack.counter.snapshot()
            stats.append({"iter": it, "active": int(act.size),
                          "matvec": mv - snap[0], "quad": qd - snap[1],
                          "grad_norm": grad_norm})
        if grad_norm <= config.inner_tol:
            return DualIterate(rho, [int(m) for m in act], k_v, prob.k_alpha,
                               grad_norm, it, True, stats=stats)

        H = prob.hessian(rho, norms2, k_v)
        cf = _factor_with_damping(H, config, {"outer_iter": state.outer_iter,
                                              "inner_iter": it,
                                              "grad_norm": grad_norm})
        delta = -cho_solve(cf, g)
        slope = float(g @ delta)
        if slope >= 0.0:
            raise NumericalError("Newton direction is not a descent direction",
                                 diagnostics={"slope": slope, "inner_iter": it})

        rho_sum = float(rho.sum())
        phi0 = (prob.data_value_safe(rho) + prob.st_value(norms2)
                + prob.bias_value(rho_sum))
        if stats is not None:
            stats[-1]["phi"] = phi0
        # decrement below what float64 can certify: accept as converged
        if -slope / 2.0 <= RESOLUTION_EPS * (1.0 + abs(phi0)):
            return DualIterate(rho, [int(m) for m in act], k_v, prob.k_alpha,
                               grad_norm, it, True, at_resolution=True, stats=stats)

        # --- line-search bookkeeping on the endpoint-active kernels ---
        trial = rho + delta
        norms2_trial = prob.screen(trial)
        act_trial = prob.active_from(norms2_trial)
        segment = sorted(set(int(m) for m in act) | set(int(m) for m in act_trial))
        coefs = {}
        for m in segment:
            n0 = norms2[m]
            if np.isnan(n0):
                n0 = stack.quad(m, prob.v_block(m, rho))
            gm = prob.gam[m]
            if m in k_v:
                c1 = float(delta @ k_v[m])          # delta' K_m v_m
                n1 = norms2_trial[m]
                if np.isnan(n1):
                    c2 = stack.quad(m, delta)
                else:
                    c2 = (n1 - n0 - 2.0 * gm * c1) / (gm * gm)
            else:
                c2 = stack.quad(m, delta)
                n1 = norms2_trial[m]
                c1 = (n1 - n0 - gm * gm * c2) / (2.0 * gm)
            coefs[m] = (float(n0), c1, max(float(c2), 0.0))

        delta_sum = float(delta.sum())

        def phi_at(c: float) -> float:
            r = rho + c * delta
            val = prob.data_value_safe(r)
            if not np.isfinite(val):
                return np.inf
            val += prob.bias_value(rho_sum + c * delta_sum)
            for m in segment:
                n0, c1, c2 = coefs[m]
                gm = prob.gam[m]
                n2 = n0 + 2.0 * c * gm * c1 + c * c * gm * gm * c2
                if n2 > prob.thr2[m]:
                    val += (np.sqrt(n2) - prob.thr[m]) ** 2 / (2.0 * gm)
            return val

        c = 1.0
        n_back = 0
        while phi_at(c) > phi0 + config.armijo_c1 * c * slope:
            c *= config.armijo_backtrack
            n_back += 1
            if c < config.armijo_min_step:
                raise NumericalError(
                    "Armijo line search stalled below the minimum step",
                    diagnostics={"inner_iter": it, "grad_norm": grad_norm,
                                 "phi": phi0})
        rho = rho + c * delta
        if stats is not None:
            stats[-1].update({"step": c, "backtracks": n_back})

        # norms at the accepted point: polynomial update on the segment set,
        # proven inactive elsewhere
        new_norms2 = np.full(prob.M, np.nan)
        for m in segment:
            n0, c1, c2 = coefs[m]
            gm = prob.gam[m]
            new_norms2[m] = max(n0 + 2.0 * c * gm * c1 + c * c * gm * gm * c2, 0.0)
        norms2 = new_norms2

    g, act, k_v = prob.gradient(rho, norms2, with_cache=True)
    grad_norm = float(np.abs(g).max())
    raise ConvergenceError(
        f"inner Newton did not reach tolerance {config.inner_tol} "
        f"within {config.max_inner} iterations (grad norm {grad_norm:.3e})",
        last_iterate=DualIterate(rho, [int(m) for m in act], k_v, prob.k_alpha,
                                 grad_norm, config.max_inner, False, stats=stats),
        grad_norm=grad_norm)
