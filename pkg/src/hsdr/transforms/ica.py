from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import EmptyInput, InvalidK
from ..linalg import canonical_signs, covariance, eigh_symmetric
from ._base import LinearTransform, apply_samples

DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-6


def _decorrelate(w: np.ndarray) -> np.ndarray:
    """Symmetric orthogonalization ``(W W^T)^(-1/2) W``."""
    dec = eigh_symmetric(0.5 * ((w @ w.T) + (w @ w.T).T))
    u = dec.eigenvectors
    lam = np.maximum(dec.eigenvalues, np.finfo(float).tiny)
    return (u / np.sqrt(lam)) @ u.T @ w


def fit_ica(samples, k: int, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER,
            tol: float = DEFAULT_TOL) -> LinearTransform:
    """Symmetric FastICA with the ``tanh`` contrast on PCA-whitened data.

    The data are whitened to ``k`` dimensions, then the unmixing matrix is
    refined by the fixed-point update

        W+ = E[g(W z) z^T] - diag(E[g'(W z)]) W,   W+ <- (W+ W+^T)^(-1/2) W+

    until ``max |abs(diag(W+ W^T)) - 1| < tol``. If ``max_iter`` runs out the
    last iterate is kept, ``metadata["converged"]`` is False and a
    ``ConvergenceWarning`` is issued.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"samples must be 2-D, got {x.shape}")
    n, n_bands = x.shape
    if not 1 <= k <= n_bands:
        raise InvalidK(f"k={k} outside [1, {n_bands}]")
    if n <= k:
        raise EmptyInput(f"need more than k={k} samples, got {n}")

    stats = covariance(x)
    dec = eigh_symmetric(stats.covariance)
    lam = dec.eigenvalues[:k]
    lam = np.maximum(lam, max(lam[0], 1.0) * 1e-12)
    whitening = dec.eigenvectors[:, :k].T / np.sqrt(lam)[:, None]
    z = (x - stats.mean) @ whitening.T

    rng = np.random.default_rng(seed)
    w = _decorrelate(rng.standard_normal((k, k)))
    converged = False
    lim = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        g = np.tanh(z @ w.T)
        g_prime = 1.0 - g * g
        w_new = (g.T @ z) / n - g_prime.mean(axis=0)[:, None] * w
        w_new = _decorrelate(w_new)
        lim = float(np.max(np.abs(np.abs(np.sum(w_new * w, axis=1)) - 1.0)))
        w = w_new
        if lim < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"FastICA stopped after {max_iter} iterations (tolerance {lim:.2e} > {tol:g})",
            ConvergenceWarning,
            stacklevel=2,
        )

    # row sign flips keep the output white and make it seed-independent in sign
    projection = canonical_signs((w @ whitening).T).T
    return LinearTransform(
        method="ica",
        mean=stats.mean,
        projection=projection,
        metadata={
            "seed": int(seed),
            "n_iter": n_iter,
            "converged": converged,
            "final_tolerance": lim,
            "whitening_variance": lam.tolist(),
        },
    )


class FastICA(TransformerMixin, BaseEstimator):
    """Independent components via symmetric FastICA.

    Parameters
    ----------
    n_components : int, default=15
    random_state : int, default=0
        Seed for the initial unmixing matrix.
    max_iter : int, default=500
    tol : float, default=1e-6
    """

    def __init__(self, n_components=15, random_state=0, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
        self.n_components = n_components
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.transform_ = fit_ica(X, self.n_components, seed=self.random_state,
                                  max_iter=self.max_iter, tol=self.tol)
        self.n_features_in_ = X.shape[1]
        self.components_ = self.transform_.projection
        self.mean_ = self.transform_.mean
        self.n_iter_ = self.transform_.metadata["n_iter"]
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_samples(self.transform_, check_array(X, dtype=np.float64))
