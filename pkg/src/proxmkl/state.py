"""Solver configuration, penalty schedule and primal iterate containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class GammaSchedule:
    """Nondecreasing penalty parameters: one per kernel block, plus the bias
    and (hinge only) slack components.  Grown geometrically up to a cap."""

    kernel: np.ndarray          # shape (M,)
    bias: float
    xi: float = 0.0
    zeta: float = 0.0

    @classmethod
    def constant(cls, n_kernels: int, value: float) -> "GammaSchedule":
        return cls(kernel=np.full(n_kernels, float(value)), bias=float(value),
                   xi=float(value), zeta=float(value))

    def grown(self, growth: float, cap: float) -> "GammaSchedule":
        return GammaSchedule(
            kernel=np.minimum(self.kernel * growth, cap),
            bias=min(self.bias * growth, cap),
            xi=min(self.xi * growth, cap),
            zeta=min(self.zeta * growth, cap),
        )


@dataclass
class SolverConfig:
    """Knobs of the proximal training loop.

    ``outer_tol`` is the relative duality gap threshold; ``inner_tol`` bounds
    the max-norm of the smoothed dual gradient.  ``hessian_damping`` of None
    means 1e-8 * trace(H)/N, escalated tenfold up to ``damping_max`` when the
    Cholesky factorization fails.
    """

    C: float = 0.05
    gamma_init: float = 1.0
    gamma_growth: float = 2.0
    gamma_cap: float = 1e8
    outer_tol: float = 0.01
    inner_tol: float = 1e-6
    max_outer: int = 60
    max_inner: int = 100
    armijo_c1: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_min_step: float = 1e-12
    hessian_damping: float | None = None
    damping_max: float = 1e-2
    instrument: bool = False

    def validate(self) -> None:
        if self.C <= 0:
            raise ConfigError("C must be > 0")
        if self.gamma_growth < 1:
            raise ConfigError("gamma_growth must be >= 1")
        if self.gamma_init <= 0 or self.gamma_cap < self.gamma_init:
            raise ConfigError("need 0 < gamma_init <= gamma_cap")
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ConfigError("tolerances must be > 0")
        if not (0 < self.armijo_backtrack < 1):
            raise ConfigError("armijo backtrack factor must be in (0, 1)")


@dataclass
class SolverState:
    """Primal iterate of the outer proximal loop.

    ``alpha`` maps kernel index to its coefficient block; absent keys are
    exactly zero (soft-thresholding produces bitwise zeros).  ``xi``/``zeta``
    are the hinge slack blocks, None for smooth losses.
    """

    alpha: dict[int, np.ndarray]
    b: float
    gamma: GammaSchedule
    outer_iter: int
    n_kernels: int
    n_samples: int
    xi: np.ndarray | None = None
    zeta: np.ndarray | None = None

    @classmethod
    def initial(cls, n_kernels: int, n_samples: int, hinge: bool,
                config: SolverConfig) -> "SolverState":
        return cls(
            alpha={},
            b=0.0,
            gamma=GammaSchedule.constant(n_kernels, config.gamma_init),
            outer_iter=0,
            n_kernels=n_kernels,
            n_samples=n_samples,
            xi=np.zeros(n_samples) if hinge else None,
            zeta=np.zeros(n_samples) if hinge else None,
        )

    @property
    def is_hinge(self) -> bool:
        return self.xi is not None

    def active_blocks(self) -> list[int]:
        return sorted(self.alpha)
