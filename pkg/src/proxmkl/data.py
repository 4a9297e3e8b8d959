"""Dataset ingestion, splitting, standardization and synthetic generators."""

from __future__ import annotations

import csv as _csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .kernels import GramStack, KernelSpec, compute_gram


@dataclass
class Dataset:
    """Feature matrix with labels and bookkeeping.

    ``label_map`` records any remapping applied to raw file labels;
    ``scaler`` is (mean, std) of the split this dataset was standardized
    with, set by :func:`split`.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None
    provenance: str = ""
    label_map: dict | None = None
    scaler: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise InputError(f"X must be 2-d, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise InputError(f"labels shape {self.y.shape} does not match "
                             f"{self.X.shape[0]} rows")
        if self.X.shape[0] < 2:
            raise InputError("need at least 2 samples")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise InputError("dataset contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _map_labels(y: np.ndarray, task: str) -> tuple[np.ndarray, dict | None]:
    distinct = np.unique(y)
    if task == "regression":
        return y, None
    is_twoclass = distinct.size == 2
    if task == "auto":
        looks_integral = np.allclose(distinct, np.round(distinct))
        if not (is_twoclass and looks_integral):
            return y, None            # treated as regression targets
    elif not is_twoclass:
        raise InputError(f"classification needs exactly 2 distinct labels, "
                         f"got {distinct.size}")
    lo, hi = float(distinct[0]), float(distinct[1])
    if (lo, hi) == (-1.0, 1.0):
        return y, None
    mapped = np.where(y == lo, -1.0, 1.0)
    return mapped, {lo: -1.0, hi: 1.0}


def load(path, fmt: str = "libsvm", task: str = "auto",
         csv_header: bool = False) -> Dataset:
    """Parse a dataset file.

    ``libsvm``: one "label idx:val ..." line per sample with 1-based
    indices.  ``csv``: label in the first column, features after.  Two-class
    integral labels (0/1 or 1/2) are remapped to -1/+1 and the mapping is
    recorded on the dataset.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"dataset file {path} does not exist")
    text = path.read_text()
    if not text.strip():
        raise InputError(f"{path} is empty")
    if fmt == "libsvm":
        X, y = _parse_libsvm(text)
    elif fmt == "csv":
        X, y = _parse_csv(text, csv_header)
    else:
        raise InputError(f"unknown format {fmt!r}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError(f"{path} contains non-finite values")
    y, label_map = _map_labels(y, task)
    return Dataset(X=X, y=y, provenance=str(path), label_map=label_map)


def _parse_libsvm(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    max_idx = 0
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise ParseError(f"bad label {parts[0]!r}", line=ln)
        feats: dict[int, float] = {}
        for tok in parts[1:]:
            try:
                idx_s, val_s = tok.split(":", 1)
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", line=ln)
            if idx < 1:
                raise ParseError(f"feature index must be >= 1, got {idx}", line=ln)
            feats[idx] = val
            max_idx = max(max_idx, idx)
        rows.append(feats)
    if not rows:
        raise InputError("no data lines found")
    X = np.zeros((len(rows), max_idx))
    for i, feats in enumerate(rows):
        for idx, val in feats.items():
            X[i, idx - 1] = val
    return X, np.asarray(labels)


def _parse_csv(text: str, header: bool) -> tuple[np.ndarray, np.ndarray]:
    reader = _csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    start = 1 if header else 0
    if len(rows) <= start:
        raise InputError("no data rows found")
    data = []
    for ln, row in enumerate(rows[start:], start=start + 1):
        try:
            data.append([float(v) for v in row])
        except ValueError as e:
            raise ParseError(str(e), line=ln)
    arr = np.asarray(data)
    if arr.shape[1] < 2:
        raise InputError("csv needs a label column plus at least one feature")
    return arr[:, 1:], arr[:, 0]


def save(ds: Dataset, path, fmt: str = "libsvm") -> None:
    """Write a dataset in a form :func:`load` parses back bit-identically."""
    path = Path(path)
    lines = []
    if fmt == "libsvm":
        for i in range(ds.n):
            toks = [repr(float(ds.y[i]))]
            toks += [f"{j + 1}:{float(ds.X[i, j])!r}" for j in range(ds.d)]
            lines.append(" ".join(toks))
    elif fmt == "csv":
        for i in range(ds.n):
            lines.append(",".join([repr(float(ds.y[i]))]
                                  + [repr(float(v)) for v in ds.X[i]]))
    else:
        raise InputError(f"unknown format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")


def standardize(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-score columns; zero-variance columns are left unscaled."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return (X - mean) / std, mean, std


def apply_scaler(X, mean, std) -> np.ndarray:
    return (np.asarray(X, dtype=float) - mean) / std


def split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition; features are z-scored with statistics
    computed on the training part only."""
    if not 0.0 < fraction < 1.0:
        raise InputError(f"split fraction must be in (0, 1), got {fraction}")
    n_train = int(round(ds.n * fraction))
    if n_train < 2 or ds.n - n_train < 1:
        raise InputError(f"split leaves too few points (train {n_train} of {ds.n})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    tr_idx, te_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    Xtr, mean, std = standardize(ds.X[tr_idx])
    Xte = apply_scaler(ds.X[te_idx], mean, std)
    scaler = (mean, std)
    train = Dataset(X=Xtr, y=ds.y[tr_idx], provenance=ds.provenance + "[train]",
                    label_map=ds.label_map, scaler=scaler)
    test = Dataset(X=Xte, y=ds.y[te_idx], provenance=ds.provenance + "[test]",
                   label_map=ds.label_map, scaler=scaler)
    return train, test


# ---------------------------------------------------------------------------
# synthetic benchmarks


def synth_ringnorm(n: int, d: int, seed: int) -> Dataset:
    """Two-class Gaussian task: one wide isotropic class against one shifted
    unit-variance class (a classic hard binary benchmark shape)."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    X = np.empty((n, d))
    shift = 2.0 / np.sqrt(d)
    pos = y > 0
    X[pos] = rng.normal(0.0, 2.0, size=(int(pos.sum()), d))
    X[~pos] = rng.normal(shift, 1.0, size=(int((~pos).sum()), d))
    return Dataset(X=X, y=y, provenance=f"synth_ringnorm(n={n},d={d},seed={seed})")


def synth_sparse_mkl(n: int, n_kernels: int, n_informative: int, seed: int,
                     group_size: int = 2, bandwidth: float = 1.0,
                     ) -> tuple[Dataset, GramStack, list[int]]:
    """Sparsity-recovery fixture: one Gaussian kernel per disjoint feature
    group, labels driven by a nonlinear function of the informative groups
    only; the remaining groups are independent noise.

    Labels are balanced by thresholding at the sample median.
    """
    if n_informative > n_kernels:
        raise InputError("n_informative cannot exceed n_kernels")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_kernels * group_size))
    informative = sorted(int(j) for j in
                         rng.choice(n_kernels, size=n_informative, replace=False))
    h = np.zeros(n)
    for j in informative:
        a = X[:, group_size * j]
        b = X[:, group_size * j + 1] if group_size > 1 else a
        h += a * b + 0.8 * a - 0.5 * b * b
    y = np.where(h > np.median(h), 1.0, -1.0)
    ds = Dataset(X=X, y=y,
                 provenance=f"synth_sparse_mkl(n={n},M={n_kernels},seed={seed})")
    mats = []
    for m in range(n_kernels):
        feats = tuple(range(group_size * m, group_size * (m + 1)))
        spec = KernelSpec("gaussian", bandwidth=bandwidth, features=feats)
        mats.append(compute_gram(spec, X))
    return ds, GramStack(mats), informative
