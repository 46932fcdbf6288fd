"""FastICA on SVD time-activation functions.

The activations are centred and symmetrically whitened, then rotated by
a fixed-point iteration with symmetric orthogonalisation. The default
contrast is the cubic one (kurtosis), so the rotation pushes towards
exactly the statistic used later to rank candidates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .factorization import SvdResult

logger = logging.getLogger(__name__)

CONTRASTS = ("cube", "logcosh")


class DegenerateActivationError(ValueError):
    """An activation function is constant or the set is linearly dependent."""


@dataclass(frozen=True)
class IcaOptions:
    max_iterations: int = 1000
    tolerance: float = 1e-6
    contrast: str = "cube"
    restarts: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.contrast not in CONTRASTS:
            raise ValueError(f"unknown contrast {self.contrast!r}; choose from {CONTRASTS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass(frozen=True)
class IcaResult:
    activations: np.ndarray  # [frames x r], zero mean, unit variance
    spectra: np.ndarray  # [bins x r]
    unmixing: np.ndarray  # [r x r], acts on the whitened activations
    whitening: np.ndarray  # [r x r]
    offset: np.ndarray  # [r], mean removed from each activation
    iterations_used: int
    converged: bool

    @property
    def rank(self) -> int:
        return self.activations.shape[1]

    def reconstruct(self) -> np.ndarray:
        """spectra x (activations + offset)^T, equal to U diag(S) V^T."""
        return self.spectra @ (self.activations + self.offset).T


def _whiten(V: np.ndarray):
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError(f"expected [frames x r] activations, got shape {V.shape}")
    mean = V.mean(axis=0)
    Vc = V - mean
    std = Vc.std(axis=0)
    scale = np.maximum(np.linalg.norm(V, axis=0), np.finfo(float).tiny)
    flat = np.flatnonzero(std <= 1e-12 * scale / np.sqrt(V.shape[0]))
    if flat.size:
        raise DegenerateActivationError(f"activation(s) {flat.tolist()} have zero variance")
    cov = Vc.T @ Vc / V.shape[0]
    d, E = np.linalg.eigh(cov)
    if d[0] <= 1e-12 * d[-1]:
        raise DegenerateActivationError("activation covariance is singular")
    K = (E / np.sqrt(d)) @ E.T
    K_inv = (E * np.sqrt(d)) @ E.T
    return Vc @ K, K, K_inv, mean


def whiten_activations(svd) -> np.ndarray:
    """Centre and symmetrically whiten the activation columns.

    Each output column has zero mean and unit variance, and distinct
    columns are uncorrelated. Accepts an :class:`SvdResult` or a plain
    [frames x r] array.
    """
    V = svd.V if isinstance(svd, SvdResult) else svd
    return _whiten(V)[0]


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(W @ W.T)
    return (u / np.sqrt(s)) @ u.T @ W


def _fixed_point(Z: np.ndarray, W: np.ndarray, opts: IcaOptions):
    n = Z.shape[0]
    for it in range(1, opts.max_iterations + 1):
        Y = Z @ W.T
        if opts.contrast == "cube":
            W_new = (Y**3).T @ Z / n - 3.0 * W
        else:
            g = np.tanh(Y)
            W_new = g.T @ Z / n - (1.0 - g**2).mean(axis=0)[:, None] * W
        W_new = _sym_decorrelate(W_new)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
        W = W_new
        if change < opts.tolerance:
            return W, it, True
    return W, opts.max_iterations, False


def _excess_kurtosis(Y: np.ndarray) -> np.ndarray:
    return (Y**4).mean(axis=0) - 3.0


def _random_rotation(rng: np.random.Generator, r: int) -> np.ndarray:
    q, R = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(R))


def fastica(svd, opts: IcaOptions | None = None) -> IcaResult:
    """Rotate whitened activations towards statistical independence.

    Parameters
    ----------
    svd : SvdResult or ndarray
        Truncated SVD of a spectrogram, or a bare [frames x r] matrix of
        activations (in which case ``spectra`` is expressed relative to an
        identity basis).
    opts : IcaOptions, optional

    Returns
    -------
    IcaResult
        Activations are sign-normalised to non-negative skewness. Failing
        to converge is reported through ``converged``, not raised.
    """
    opts = opts or IcaOptions()
    if isinstance(svd, SvdResult):
        V, basis = svd.V, svd.U * svd.S
    else:
        V = np.asarray(svd, dtype=np.float64)
        basis = np.eye(V.shape[1]) if V.ndim == 2 else None
    if V.ndim != 2 or V.shape[1] < 2:
        raise ValueError("ICA needs at least two activation functions")

    Z, K, K_inv, mean = _whiten(V)
    r = Z.shape[1]

    W, iters, converged = _fixed_point(Z, np.eye(r), opts)
    if opts.restarts:
        rng = np.random.default_rng(opts.seed)
        best = np.abs(_excess_kurtosis(Z @ W.T)).sum()
        for _ in range(opts.restarts):
            cand = _fixed_point(Z, _random_rotation(rng, r), opts)
            score = np.abs(_excess_kurtosis(Z @ cand[0].T)).sum()
            if score > best:
                best = score
                W, iters, converged = cand
    if not converged:
        logger.warning("FastICA did not converge in %d iterations", opts.max_iterations)

    A = Z @ W.T
    skew = (A**3).mean(axis=0)
    signs = np.where(skew < 0, -1.0, 1.0)
    W = W * signs[:, None]
    A = A * signs

    spectra = basis @ K_inv @ W.T
    offset = mean @ K @ W.T
    return IcaResult(
        activations=A,
        spectra=spectra,
        unmixing=W,
        whitening=K,
        offset=offset,
        iterations_used=iters,
        converged=converged,
    )
