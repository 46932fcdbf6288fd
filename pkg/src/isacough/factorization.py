"""Truncated SVD of a magnitude spectrogram.

The leading singular subspace is found from an eigendecomposition of the
Gram matrix on the smaller side (only the top ``r`` eigenpairs are
requested from LAPACK), then polished by one Rayleigh-Ritz step on the
original matrix. The refinement restores full orthonormality of both
factors and the relative accuracy of the singular values that forming
the Gram matrix alone would lose.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .spectrogram import MagnitudeSpectrogram

logger = logging.getLogger(__name__)

DEFAULT_RANK = 9


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray  # [bins x r] frequency-basis spectra
    S: np.ndarray  # [r] singular values, descending
    V: np.ndarray  # [frames x r] time-activation functions

    @property
    def rank(self) -> int:
        return self.S.shape[0]


def _as_matrix(spec) -> np.ndarray:
    values = spec.values if isinstance(spec, MagnitudeSpectrogram) else spec
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains NaN or infinity")
    return X


def _fix_signs(U: np.ndarray, V: np.ndarray) -> None:
    """Flip each (U, V) column pair so U's largest-magnitude entry is positive."""
    if U.shape[1] == 0:
        return
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U *= signs
    V *= signs


def _top_subspace(X: np.ndarray, r: int) -> np.ndarray:
    """Orthonormal basis [rows x r] of X's leading left singular subspace.

    Assumes X.shape[0] <= X.shape[1] so the Gram matrix is the small one.
    """
    n = X.shape[0]
    gram = X @ X.T
    _, vecs = linalg.eigh(gram, subset_by_index=[n - r, n - 1], driver="evr")
    return vecs[:, ::-1]


def truncated_svd(spec, r: int = DEFAULT_RANK) -> SvdResult:
    """Leading ``r`` singular triplets of a spectrogram (or plain matrix).

    ``r`` larger than the matrix allows is clamped with a warning. The
    output is deterministic: each (U, V) pair is sign-normalised so the
    largest-magnitude entry of the U column is positive.
    """
    X = _as_matrix(spec)
    if r < 0:
        raise ValueError(f"rank must be non-negative, got {r}")
    limit = min(X.shape)
    if r > limit:
        warnings.warn(f"rank {r} exceeds matrix dimensions {X.shape}; using {limit}", stacklevel=2)
        r = limit
    bins, frames = X.shape
    if r == 0:
        return SvdResult(np.zeros((bins, 0)), np.zeros(0), np.zeros((frames, 0)))

    transposed = bins > frames
    A = X.T if transposed else X

    U0 = _top_subspace(A, r)
    # Rayleigh-Ritz refinement on span(A^T U0)
    Q, _ = np.linalg.qr(A.T @ U0)
    Ub, S, Wt = np.linalg.svd(A @ Q, full_matrices=False)
    U = np.ascontiguousarray(Ub)
    V = Q @ Wt.T
    if transposed:
        U, V = V, U
    _fix_signs(U, V)
    logger.debug("truncated_svd: shape=%s rank=%d s=%s", X.shape, r, S)
    return SvdResult(U, S, V)


def reconstruct(svd: SvdResult) -> np.ndarray:
    """U diag(S) V^T."""
    return (svd.U * svd.S) @ svd.V.T
