"""Outer proximal loop: soft-threshold updates, training and prediction.

Each outer iteration minimizes the smoothed dual objective, then applies

    alpha_m <- ST_{gam_m C}(alpha_m + gam_m rho*)
    b       <- b + gam_b sum_i rho*_i

(plus the slack updates on the hinge path), grows the penalties
geometrically and checks the relative duality gap.  Thresholded blocks are
bitwise zero, so the iterate stays sparse and the model stores only the
surviving blocks.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .duality import relative_gap
from .errors import ContractError, ConvergenceError, NumericalError
from .inner import initial_rho, newton_inner, project_warm_start
from .kernels import BankConfig, GramStack, KernelSpec, build_kernel_bank
from .losses import LossSpec
from .prox import st_scale
from .state import SolverConfig, SolverState

# blocks with K-norm below this are dropped from the trained model
MODEL_NORM_FLOOR = 1e-10


@dataclass
class TraceRow:
    """One line of the per-iteration training trace."""

    iter: int
    primal: float
    dual: float
    gap: float
    active_kernels: int
    seconds: float
    inner_iters: int = 0

    CSV_HEADER = "iter,primal_obj,dual_obj,rel_gap,active_kernels,seconds"

    def to_csv(self) -> str:
        return (f"{self.iter},{self.primal!r},{self.dual!r},{self.gap!r},"
                f"{self.active_kernels},{self.seconds!r}")


@dataclass
class Diagnostics:
    converged: bool = False
    reason: str = ""
    outer_iters: int = 0
    final_gap: float = np.inf
    seconds: float = 0.0
    trace: list[TraceRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    solver: str = "spicy"


@dataclass
class MklModel:
    """Trained sparse kernel combination.

    ``alpha`` holds only the nonzero blocks; ``weights`` are the
    nonnegative, sum-to-one kernel weights proportional to the block
    K-norms.  ``kernel_specs``/``scales`` let prediction rebuild test Gram
    blocks with the training normalization; ``train_X`` (already
    standardized) and ``feature_mean``/``feature_std`` are attached by the
    data pipeline when available.
    """

    alpha: dict[int, np.ndarray]
    b: float
    active: list[int]
    weights: dict[int, float]
    block_norms: dict[int, float]
    loss: str
    C: float
    kernel_specs: dict[int, KernelSpec | None]
    scales: dict[int, float]
    diagnostics: Diagnostics
    train_X: np.ndarray | None = None
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    label_map: dict | None = None

    @property
    def n_active(self) -> int:
        return len(self.active)


def outer_update(state: SolverState, rho_star: np.ndarray, spec: LossSpec,
                 stack: GramStack, config: SolverConfig) -> SolverState:
    """Apply the proximal update at the inner minimizer and grow the penalties."""
    gam = state.gamma.kernel
    thr = gam * config.C
    l2 = float(np.linalg.norm(rho_star))
    new_alpha: dict[int, np.ndarray] = {}
    for m in range(state.n_kernels):
        a = state.alpha.get(m)
        # zero blocks whose bound rules out activation stay exactly zero
        if a is None:
            bound = gam[m] * np.sqrt(stack.lam_bound(m)) * l2
            if bound <= thr[m]:
                continue
            v = gam[m] * rho_star
        else:
            v = a + gam[m] * rho_star
        nrm = np.sqrt(stack.quad(m, v))
        s = st_scale(nrm, thr[m])
        if s > 0.0:
            new_alpha[m] = v * s
    b = state.b + state.gamma.bias * float(rho_star.sum())
    xi = zeta = None
    if state.is_hinge:
        u = spec.y * rho_star
        xi = np.maximum(0.0, state.xi - state.gamma.xi * (1.0 - u))
        zeta = np.maximum(0.0, state.zeta - state.gamma.zeta * u)
    return SolverState(
        alpha=new_alpha,
        b=b,
        gamma=state.gamma.grown(config.gamma_growth, config.gamma_cap),
        outer_iter=state.outer_iter + 1,
        n_kernels=state.n_kernels,
        n_samples=state.n_samples,
        xi=xi,
        zeta=zeta,
    )


def _block_norms(state: SolverState, stack: GramStack) -> dict[int, float]:
    return {m: float(np.sqrt(stack.quad(m, a))) for m, a in state.alpha.items()}


def extract_model(state: SolverState, stack: GramStack, spec: LossSpec,
                  config: SolverConfig, diagnostics: Diagnostics) -> MklModel:
    """Keep the blocks above the norm floor and normalize the kernel weights."""
    norms = {m: n for m, n in _block_norms(state, stack).items()
             if n > MODEL_NORM_FLOOR}
    total = sum(norms.values())
    weights = {m: (n / total if total > 0 else 0.0) for m, n in norms.items()}
    active = sorted(norms)
    return MklModel(
        alpha={m: state.alpha[m].copy() for m in active},
        b=state.b,
        active=active,
        weights=weights,
        block_norms=norms,
        loss=spec.kind,
        C=config.C,
        kernel_specs={m: stack.spec(m) for m in active},
        scales={m: stack.scale(m) for m in active},
        diagnostics=diagnostics,
    )


def train(data, y, spec: LossSpec | str, config: SolverConfig,
          bank: BankConfig | None = None) -> MklModel:
    """Run the proximal training loop until the relative duality gap closes.

    Parameters
    ----------
    data : GramStack or (N, d) array
        Precomputed kernel bank, or raw features from which the bank is
        built with ``bank`` (default grid).
    y : labels (ignored when ``spec`` is a LossSpec).
    spec : LossSpec or loss name.
    config : SolverConfig (C, penalty schedule, tolerances).

    Returns the trained model; non-convergence is flagged in
    ``model.diagnostics`` rather than raised.
    """
    config.validate()
    if isinstance(data, GramStack):
        stack = data
    else:
        stack = build_kernel_bank(np.asarray(data, dtype=float), bank)
    if isinstance(spec, str):
        spec = LossSpec(spec, np.asarray(y, dtype=float))
    if stack.n_samples != spec.n:
        raise ContractError(f"kernel bank is for {stack.n_samples} samples, "
                            f"labels have {spec.n}")

    state = SolverState.initial(stack.n_kernels, stack.n_samples,
                                hinge=(spec.kind == "hinge"), config=config)
    diag = Diagnostics(solver="spicy")
    rho_warm: np.ndarray | None = None
    gap_hist: list[float] = []
    inner_failures = 0
    t0 = perf_counter()
    reason = "max_outer"
    converged = False

    for t in range(config.max_outer):
        rho0 = initial_rho(spec) if rho_warm is None else \
            project_warm_start(spec, rho_warm)
        try:
            it = newton_inner(state, spec, stack, config, rho0)
            inner_failures = 0
        except ConvergenceError as err:
            if err.last_iterate is None:
                raise
            it = err.last_iterate
            inner_failures += 1
            diag.warnings.append(f"outer {t}: inner solve stopped at gradient "
                                 f"norm {err.grad_norm:.2e}")
        except NumericalError as err:
            if t == 0:
                raise
            diag.warnings.append(f"outer {t}: inner solve failed ({err}); stopping")
            reason = "inner_failure"
            break
        rho_warm = it.rho
        state = outer_update(state, it.rho, spec, stack, config)
        report = relative_gap(state, stack, spec, config.C, it.rho)
        now = perf_counter() - t0
        diag.trace.append(TraceRow(iter=t, primal=report.primal, dual=report.dual,
                                   gap=report.relative_gap,
                                   active_kernels=len(state.alpha),
                                   seconds=now, inner_iters=it.n_iter))
        gap_hist.append(report.relative_gap)
        if report.relative_gap <= config.outer_tol:
            converged = True
            reason = "gap_tol"
            break
        if inner_failures >= 3:
            reason = "inner_failure"
            break
        # penalties capped and the gap no longer moves: report unconverged
        if (state.gamma.kernel.min() >= config.gamma_cap and len(gap_hist) >= 6
                and abs(gap_hist[-1] - gap_hist[-6]) < 1e-3 * abs(gap_hist[-6])):
            reason = "stagnation"
            break

    diag.converged = converged
    diag.reason = reason
    diag.outer_iters = state.outer_iter
    diag.final_gap = gap_hist[-1] if gap_hist else np.inf
    diag.seconds = perf_counter() - t0
    if not converged:
        diag.warnings.append(f"stopped without reaching gap {config.outer_tol} "
                             f"({reason}); final gap {diag.final_gap:.3g}")
    model = extract_model(state, stack, spec, config, diag)
    if not model.active:
        msg = "trained model has no active kernels (C may be too large)"
        diag.warnings.append(msg)
        _warnings.warn(msg)
    return model


def predict(model: MklModel, gram_rows: dict[int, np.ndarray]) -> np.ndarray:
    """Decision values on test points from per-active-kernel cross blocks.

    ``gram_rows[m]`` must be the (N_test, N_train) kernel block for active
    kernel m, scaled with the training normalization constant.
    """
    missing = [m for m in model.active if m not in gram_rows]
    if missing:
        raise ContractError(f"gram_rows missing active kernels {missing}")
    n_test = None
    out = None
    for m in model.active:
        G = np.asarray(gram_rows[m], dtype=float)
        if G.ndim != 2 or G.shape[1] != model.alpha[m].shape[0]:
            raise ContractError(f"gram_rows[{m}] has shape {G.shape}, expected "
                                f"(n_test, {model.alpha[m].shape[0]})")
        if n_test is None:
            n_test = G.shape[0]
            out = np.zeros(n_test)
        out += G @ model.alpha[m]
    if out is None:                      # all-zero model: constant prediction
        return np.full(_infer_n_test(gram_rows), model.b)
    return out + model.b


def _infer_n_test(gram_rows: dict[int, np.ndarray]) -> int:
    for G in gram_rows.values():
        return np.asarray(G).shape[0]
    raise ContractError("cannot infer test size from empty gram_rows")


def predict_on_data(model: MklModel, X_test) -> np.ndarray:
    """Standardize test features with the stored statistics, rebuild the
    cross-Gram blocks from the stored specs and predict."""
    from .kernels import cross_gram   # local import keeps module load light

    if model.train_X is None:
        raise ContractError("model carries no training points; use predict() "
                            "with precomputed gram_rows")
    X = np.asarray(X_test, dtype=float)
    if model.feature_mean is not None:
        X = (X - model.feature_mean) / model.feature_std
    rows = {}
    for m in model.active:
        spec = model.kernel_specs[m]
        if spec is None:
            raise ContractError(f"active kernel {m} has no stored spec")
        rows[m] = cross_gram(spec, X, model.train_X, scale=model.scales[m])
    if not rows:
        return np.full(X.shape[0], model.b)
    return predict(model, rows)


def c_correspondence(model: MklModel, C: float) -> float:
    """Published conversion C' = C * sum_m ||alpha_m||_K to the squared-sum
    regularization convention; 0 with a warning for an all-zero model."""
    total = sum(model.block_norms.values())
    if total == 0.0:
        _warnings.warn("correspondence degenerate: model is identically zero")
        return 0.0
    return C * total
