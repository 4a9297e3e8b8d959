"""Block soft-thresholding in the K-norm geometry.

soft_threshold is the proximal operator of t*||.||_K: it shrinks the K-norm
of a block by the threshold and returns the zero vector once the norm falls
below it.  Both solvers and the model extraction rely on thresholded blocks
being exactly zero.
"""

from __future__ import annotations

import numpy as np

from .kernels import k_norm


def st_scale(norm: float, threshold: float) -> float:
    """Shrinkage factor max(norm - threshold, 0) / norm, with 0/0 -> 0."""
    if norm <= threshold or norm == 0.0:
        return 0.0
    return (norm - threshold) / norm


def soft_threshold(v, K, threshold: float) -> np.ndarray:
    """Shrink v's K-norm by ``threshold``; zero vector when ||v||_K <= threshold."""
    v = np.asarray(v, dtype=float)
    nrm = k_norm(K, v)
    s = st_scale(nrm, threshold)
    if s == 0.0:
        return np.zeros_like(v)
    return v * s
