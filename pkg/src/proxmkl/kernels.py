"""Gram matrix bank: construction, normalization and K-weighted geometry.

Every Gram matrix handed to the solver is jittered (1e-8 on the diagonal)
and scaled to unit trace.  The scaling constant is kept on the matrix so
that test-time cross-Gram blocks can be normalized identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, InputError, NumericalError

DEFAULT_JITTER = 1e-8

# 24 Gaussian bandwidths (0.1, 0.25, 0.5, 0.75, 1, 2, 3, ..., 20) plus
# polynomial degrees 1-3 give the default 27-function grid.
DEFAULT_BANDWIDTHS = (0.1, 0.25, 0.5, 0.75, 1.0) + tuple(float(s) for s in range(2, 21))
DEFAULT_DEGREES = (1, 2, 3)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of a single kernel function.

    ``features`` is the ordered tuple of column indices the kernel sees
    (``None`` means all columns).  ``gaussian_form`` selects the exponent
    convention: ``"half"`` is exp(-||x-x'||^2 / (2*sigma^2)), ``"plain"``
    drops the factor 2.
    """

    family: str                      # "gaussian" | "polynomial"
    bandwidth: float | None = None
    degree: int | None = None
    features: tuple[int, ...] | None = None
    gaussian_form: str = "half"

    def validate(self, n_features: int | None = None) -> None:
        if self.family == "gaussian":
            if self.bandwidth is None or self.bandwidth <= 0:
                raise ConfigError(f"gaussian bandwidth must be > 0, got {self.bandwidth}")
            if self.gaussian_form not in ("half", "plain"):
                raise ConfigError(f"unknown gaussian_form {self.gaussian_form!r}")
        elif self.family == "polynomial":
            if self.degree is None or self.degree < 1:
                raise ConfigError(f"polynomial degree must be >= 1, got {self.degree}")
        else:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.features is not None:
            if len(self.features) == 0:
                raise ConfigError("feature subset must be non-empty")
            if n_features is not None and (min(self.features) < 0
                                           or max(self.features) >= n_features):
                raise ConfigError(f"feature subset {self.features} outside dimension "
                                  f"{n_features}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "bandwidth": self.bandwidth,
            "degree": self.degree,
            "features": list(self.features) if self.features is not None else None,
            "gaussian_form": self.gaussian_form,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        feats = d.get("features")
        return cls(
            family=d["family"],
            bandwidth=d.get("bandwidth"),
            degree=d.get("degree"),
            features=tuple(feats) if feats is not None else None,
            gaussian_form=d.get("gaussian_form", "half"),
        )


@dataclass
class GramMatrix:
    """A jittered, unit-trace Gram matrix together with its provenance.

    ``scale`` is the factor the jittered raw matrix was multiplied by to
    reach unit trace; test-time cross blocks must be scaled by the same
    constant.  ``lam_max_bound`` is a cheap upper bound on the largest
    eigenvalue used for norm screening.
    """

    values: np.ndarray
    spec: KernelSpec | None = None
    scale: float = 1.0
    lam_max_bound: float = 1.0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_values(cls, values) -> "GramMatrix":
        """Wrap a raw symmetric array (test fixtures, custom banks)."""
        arr = np.asarray(values, dtype=float)
        bound = float(min(np.trace(arr), np.abs(arr).sum(axis=1).max()))
        return cls(values=arr, spec=None, scale=1.0, lam_max_bound=max(bound, 0.0))


def _kernel_values(spec: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Raw kernel evaluations k(x1_i, x2_j) on the spec's feature subset."""
    if spec.features is not None:
        cols = list(spec.features)
        X1 = X1[:, cols]
        X2 = X2[:, cols]
    if spec.family == "gaussian":
        sq1 = np.sum(X1 * X1, axis=1)[:, None]
        sq2 = np.sum(X2 * X2, axis=1)[None, :]
        d2 = sq1 + sq2 - 2.0 * (X1 @ X2.T)
        np.maximum(d2, 0.0, out=d2)
        denom = 2.0 * spec.bandwidth ** 2 if spec.gaussian_form == "half" \
            else spec.bandwidth ** 2
        return np.exp(-d2 / denom)
    # polynomial, inhomogeneous: (1 + <x, x'>)^degree
    return (1.0 + X1 @ X2.T) ** spec.degree


def compute_gram(spec: KernelSpec, X, jitter: float = DEFAULT_JITTER) -> GramMatrix:
    """Evaluate a kernel on the data, jitter the diagonal, normalize to unit trace.

    Parameters
    ----------
    spec : KernelSpec
    X : (N, d) array
    jitter : added to every diagonal entry before trace normalization.

    Returns
    -------
    GramMatrix with ``trace(values) == 1`` (up to roundoff) and the
    normalization constant recorded in ``scale``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"expected a non-empty (N, d) data matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("data matrix contains non-finite entries")
    spec.validate(n_features=X.shape[1])

    K = _kernel_values(spec, X, X)
    K = 0.5 * (K + K.T)                       # kill roundoff asymmetry
    K[np.diag_indices_from(K)] += jitter
    tr = float(np.trace(K))
    if tr <= 0 or not np.isfinite(tr):
        raise NumericalError(f"non-positive trace {tr} for kernel {spec}")
    scale = 1.0 / tr
    K *= scale
    # lam_max <= min(trace, ||K||_inf) for symmetric PSD K
    bound = float(min(1.0, np.abs(K).sum(axis=1).max()))
    return GramMatrix(values=K, spec=spec, scale=scale, lam_max_bound=bound)


def cross_gram(spec: KernelSpec, X_test, X_train, scale: float = 1.0) -> np.ndarray:
    """Test-vs-train kernel block scaled by the training normalization constant."""
    X_test = np.asarray(X_test, dtype=float)
    X_train = np.asarray(X_train, dtype=float)
    if not (np.all(np.isfinite(X_test)) and np.all(np.isfinite(X_train))):
        raise InputError("data matrix contains non-finite entries")
    return scale * _kernel_values(spec, X_test, X_train)


def _as_array(K) -> np.ndarray:
    return K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)


def k_inner(K, a, c) -> float:
    """K-weighted inner product a^T K c."""
    Kv = _as_array(K)
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if a.shape != (Kv.shape[0],) or c.shape != (Kv.shape[1],):
        raise ContractError(f"dimension mismatch: K is {Kv.shape}, a is {a.shape}, "
                            f"c is {c.shape}")
    return float(a @ Kv @ c)


def k_norm(K, a, kernel_index: int | None = None) -> float:
    """Norm sqrt(a^T K a) induced by a positive definite K.

    Raises NumericalError when the quadratic form comes out negative beyond
    roundoff, reporting ``kernel_index`` if given.
    """
    Kv = _as_array(K)
    a = np.asarray(a, dtype=float)
    if a.shape != (Kv.shape[0],):
        raise ContractError(f"dimension mismatch: K is {Kv.shape}, a is {a.shape}")
    q = float(a @ Kv @ a)
    if q < 0:
        if q < -1e-10 * max(1.0, float(a @ a)):
            where = f" (kernel {kernel_index})" if kernel_index is not None else ""
            raise NumericalError(f"negative quadratic form {q}{where}: "
                                 "Gram matrix is numerically indefinite")
        q = 0.0
    return float(np.sqrt(q))


@dataclass
class OpCounter:
    """Counts kernel-block products; used to verify active-set economy."""

    matvec: int = 0
    quad: int = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.matvec, self.quad)


class GramStack:
    """Ordered bank of Gram matrices sharing one sample dimension.

    Matrix-vector products and quadratic forms go through :meth:`matvec` /
    :meth:`quad` so tests can count exactly how many kernel blocks an
    operation touched.
    """

    def __init__(self, matrices: list[GramMatrix]):
        if len(matrices) < 1:
            raise ConfigError("a kernel bank needs at least one matrix")
        n = matrices[0].n
        for i, G in enumerate(matrices):
            if G.n != n:
                raise ContractError(f"kernel {i} has dimension {G.n}, expected {n}")
        self.matrices = list(matrices)
        self.n_samples = n
        self.n_kernels = len(matrices)
        self.counter = OpCounter()

    def __len__(self) -> int:
        return self.n_kernels

    def values(self, m: int) -> np.ndarray:
        return self.matrices[m].values

    def spec(self, m: int) -> KernelSpec | None:
        return self.matrices[m].spec

    def scale(self, m: int) -> float:
        return self.matrices[m].scale

    def lam_bound(self, m: int) -> float:
        return self.matrices[m].lam_max_bound

    def matvec(self, m: int, v: np.ndarray) -> np.ndarray:
        self.counter.matvec += 1
        return self.matrices[m].values @ v

    def quad(self, m: int, v: np.ndarray) -> float:
        self.counter.quad += 1
        K = self.matrices[m].values
        q = float(v @ (K @ v))
        if q < 0:
            if q < -1e-10 * max(1.0, float(v @ v)):
                raise NumericalError(f"negative quadratic form {q} (kernel {m})")
            q = 0.0
        return q


@dataclass
class BankConfig:
    """Declarative kernel bank description (JSON-serializable).

    ``mode="grid"`` builds the bandwidth x degree grid applied per feature
    and jointly; ``mode="random"`` draws ``n_kernels`` Gaussian kernels with
    random widths on random feature subsets.
    """

    mode: str = "grid"
    bandwidths: tuple[float, ...] = DEFAULT_BANDWIDTHS
    degrees: tuple[int, ...] = DEFAULT_DEGREES
    subset_policy: str = "per_feature_and_joint"   # or "joint_only"
    jitter: float = DEFAULT_JITTER
    gaussian_form: str = "half"
    n_kernels: int = 50          # random mode only
    seed: int = 0                # random mode only

    def validate(self) -> None:
        if self.mode not in ("grid", "random"):
            raise ConfigError(f"unknown bank mode {self.mode!r}")
        if self.mode == "grid":
            if len(self.bandwidths) == 0 and len(self.degrees) == 0:
                raise ConfigError("bank config lists no kernel functions")
            if self.subset_policy not in ("per_feature_and_joint", "joint_only"):
                raise ConfigError(f"unknown subset policy {self.subset_policy!r}")
            if any(b <= 0 for b in self.bandwidths):
                raise ConfigError("bandwidths must be positive")
            if any(d < 1 for d in self.degrees):
                raise ConfigError("degrees must be >= 1")
        else:
            if self.n_kernels < 1:
                raise ConfigError("random bank needs n_kernels >= 1")
        if self.jitter < 0:
            raise ConfigError("jitter must be >= 0")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "bandwidths": list(self.bandwidths),
            "degrees": list(self.degrees),
            "subset_policy": self.subset_policy,
            "jitter": self.jitter,
            "gaussian_form": self.gaussian_form,
            "n_kernels": self.n_kernels,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BankConfig":
        cfg = cls(
            mode=d.get("mode", "grid"),
            bandwidths=tuple(d.get("bandwidths", DEFAULT_BANDWIDTHS)),
            degrees=tuple(d.get("degrees", DEFAULT_DEGREES)),
            subset_policy=d.get("subset_policy", "per_feature_and_joint"),
            jitter=d.get("jitter", DEFAULT_JITTER),
            gaussian_form=d.get("gaussian_form", "half"),
            n_kernels=d.get("n_kernels", 50),
            seed=d.get("seed", 0),
        )
        cfg.validate()
        return cfg


def build_kernel_bank(X, config: BankConfig | None = None) -> GramStack:
    """Apply every configured kernel function per feature and jointly.

    With the default grid (24 bandwidths + 3 degrees = 27 functions and the
    per-feature-and-joint policy) an n-feature dataset yields 27*(n+1)
    matrices, each jittered and trace-normalized.
    """
    config = config or BankConfig()
    config.validate()
    if config.mode == "random":
        return random_kernel_bank(X, config.n_kernels, config.seed,
                                  jitter=config.jitter,
                                  gaussian_form=config.gaussian_form)
    X = np.asarray(X, dtype=float)
    n_features = X.shape[1]
    if config.subset_policy == "per_feature_and_joint":
        subsets: list[tuple[int, ...] | None] = [(j,) for j in range(n_features)]
        subsets.append(None)
    else:
        subsets = [None]
    specs = []
    for subset in subsets:
        for bw in config.bandwidths:
            specs.append(KernelSpec("gaussian", bandwidth=bw, features=subset,
                                    gaussian_form=config.gaussian_form))
        for deg in config.degrees:
            specs.append(KernelSpec("polynomial", degree=deg, features=subset))
    mats = [compute_gram(s, X, jitter=config.jitter) for s in specs]
    return GramStack(mats)


def random_kernel_bank(X, n_kernels: int, seed: int,
                       jitter: float = DEFAULT_JITTER,
                       gaussian_form: str = "half") -> GramStack:
    """Gaussian kernels with width 5*chi2(1) + 0.1 on random feature subsets."""
    if n_kernels < 1:
        raise ConfigError("n_kernels must be >= 1")
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(n_kernels):
        sigma = 5.0 * rng.chisquare(1) + 0.1
        size = int(rng.integers(1, d + 1))
        feats = tuple(int(j) for j in np.sort(rng.choice(d, size=size, replace=False)))
        spec = KernelSpec("gaussian", bandwidth=float(sigma), features=feats,
                          gaussian_form=gaussian_form)
        mats.append(compute_gram(spec, X, jitter=jitter))
    return GramStack(mats)
