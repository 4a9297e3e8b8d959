"""Loss families, their convex conjugates and conjugate derivatives.

The inner solver minimizes a smoothed dual objective whose data term is the
loss conjugate evaluated at -rho.  For the logistic loss that conjugate is
the negative entropy of u = y*rho with open domain u in (0, 1); evaluation
outside the domain raises so the caller's line search can backtrack.  The
hinge loss has no smooth conjugate; its linear part is exposed separately
and the box constraints are enforced by slack penalties in the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConjugateDomainError, ContractError, InputError

LOSS_KINDS = ("logistic", "squared", "hinge")
SMOOTH_CONJUGATE = {"logistic": True, "squared": True, "hinge": False}

# curvature bound sup |loss''| in the prediction argument, used for step sizing
CURVATURE_BOUND = {"logistic": 0.25, "squared": 2.0}


@dataclass
class LossSpec:
    """A loss family bound to a label vector."""

    kind: str
    y: np.ndarray

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        self.y = np.asarray(self.y, dtype=float)
        if not np.all(np.isfinite(self.y)):
            raise InputError("labels contain non-finite values")
        if self.kind in ("logistic", "hinge"):
            bad = np.setdiff1d(np.unique(self.y), [-1.0, 1.0])
            if bad.size:
                raise InputError(f"classification labels must be in {{-1,+1}}, got {bad}")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def smooth_conjugate(self) -> bool:
        return SMOOTH_CONJUGATE[self.kind]


@dataclass
class ConjugateEval:
    """Value, gradient and diagonal Hessian of the conjugate term in rho."""

    value: float
    gradient: np.ndarray
    hessian_diag: np.ndarray


def loss_value(spec: LossSpec, z) -> float:
    """Total loss sum_i l(y_i, z_i) at predictions z."""
    z = np.asarray(z, dtype=float)
    _check_dim(spec, z)
    y = spec.y
    if spec.kind == "hinge":
        return float(np.sum(np.maximum(1.0 - y * z, 0.0)))
    if spec.kind == "logistic":
        # log(1 + exp(-yz)) computed without overflow for large |yz|
        m = -y * z
        return float(np.sum(np.logaddexp(0.0, m)))
    return float(np.sum((y - z) ** 2))


def loss_grad(spec: LossSpec, z) -> np.ndarray:
    """Gradient of the total loss in z (smooth losses only)."""
    z = np.asarray(z, dtype=float)
    _check_dim(spec, z)
    y = spec.y
    if spec.kind == "logistic":
        return -y / (1.0 + np.exp(y * z))
    if spec.kind == "squared":
        return 2.0 * (z - y)
    raise ContractError("hinge loss is not differentiable in z")


def conjugate_eval(spec: LossSpec, rho) -> ConjugateEval:
    """Conjugate term sum_i l*(y_i, -rho_i) with gradient and Hessian in rho.

    Logistic: per-sample value u log u + (1-u) log(1-u) with u = y*rho,
    gradient y*log(u/(1-u)), curvature 1/(u(1-u)); raises
    ConjugateDomainError when any u leaves (0, 1).
    Squared: per-sample value -rho*y + rho^2/4, curvature 1/2.
    """
    if not spec.smooth_conjugate:
        raise ContractError(f"{spec.kind} loss has no smooth conjugate; "
                            "use hinge_conjugate_linear")
    rho = np.asarray(rho, dtype=float)
    _check_dim(spec, rho)
    y = spec.y
    if spec.kind == "squared":
        value = float(np.sum(-rho * y + rho * rho / 4.0))
        grad = -y + rho / 2.0
        hess = np.full(spec.n, 0.5)
        return ConjugateEval(value, grad, hess)
    u = y * rho
    bad = np.where((u <= 0.0) | (u >= 1.0))[0]
    if bad.size:
        raise ConjugateDomainError(bad)
    value = float(np.sum(u * np.log(u) + (1.0 - u) * np.log1p(-u)))
    grad = y * (np.log(u) - np.log1p(-u))
    hess = 1.0 / (u * (1.0 - u))
    return ConjugateEval(value, grad, hess)


def hinge_conjugate_linear(spec: LossSpec, rho) -> float:
    """Linear part -sum_i y_i rho_i of the hinge conjugate.

    The box constraints 0 <= y_i rho_i <= 1 are deliberately not enforced
    here; the solver's slack penalty terms take care of them.
    """
    if spec.kind != "hinge":
        raise ContractError(f"hinge_conjugate_linear called with {spec.kind} loss")
    rho = np.asarray(rho, dtype=float)
    _check_dim(spec, rho)
    return float(-(spec.y @ rho))


def conjugate_feasible(spec: LossSpec, rho) -> bool:
    """True when rho lies strictly inside the conjugate's domain."""
    if spec.kind != "logistic":
        return True
    u = spec.y * np.asarray(rho, dtype=float)
    return bool(u.min() > 0.0 and u.max() < 1.0)


def _check_dim(spec: LossSpec, v: np.ndarray) -> None:
    if v.shape != (spec.n,):
        raise ContractError(f"expected vector of length {spec.n}, got shape {v.shape}")
