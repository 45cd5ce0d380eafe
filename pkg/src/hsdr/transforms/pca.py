from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import EmptyInput, InvalidK
from ..linalg import CovarianceStats, covariance, eigh_symmetric
from ._base import LinearTransform, apply_samples


def pca_from_stats(stats: CovarianceStats, k: int, method: str = "pca") -> LinearTransform:
    """Top-``k`` principal directions of precomputed covariance statistics."""
    n_bands = stats.n_features
    if not 1 <= k <= n_bands:
        raise InvalidK(f"k={k} outside [1, {n_bands}]")
    dec = eigh_symmetric(stats.covariance)
    total = float(np.sum(dec.eigenvalues))
    top = dec.eigenvalues[:k]
    ratio = (top / total).tolist() if total > 0 else [0.0] * k
    return LinearTransform(
        method=method,
        mean=stats.mean,
        projection=dec.eigenvectors[:, :k].T,
        metadata={
            "explained_variance": top.tolist(),
            "explained_variance_ratio": ratio,
            "total_variance": total,
            "n_samples": stats.count,
        },
    )


def fit_pca(samples, k: int) -> LinearTransform:
    """Project onto the ``k`` leading eigenvectors of the sample covariance.

    Zero eigenvalues are fine (rank-deficient data); only ``k`` outside
    ``[1, L]`` or fewer than two samples is rejected.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise EmptyInput(f"PCA needs at least 2 samples, got shape {x.shape}")
    if not 1 <= k <= x.shape[1]:
        raise InvalidK(f"k={k} outside [1, {x.shape[1]}]")
    return pca_from_stats(covariance(x), k)


class PCA(TransformerMixin, BaseEstimator):
    """Principal component projection with a Jacobi eigensolver.

    Parameters
    ----------
    n_components : int, default=15
        Number of leading components kept.

    Attributes
    ----------
    transform_ : LinearTransform
    components_ : ndarray of shape (n_components, n_features)
    mean_ : ndarray of shape (n_features,)
    explained_variance_ : ndarray of shape (n_components,)
    """

    def __init__(self, n_components=15):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        self.transform_ = fit_pca(X, self.n_components)
        self.n_features_in_ = X.shape[1]
        self.components_ = self.transform_.projection
        self.mean_ = self.transform_.mean
        self.explained_variance_ = np.asarray(self.transform_.metadata["explained_variance"])
        self.explained_variance_ratio_ = np.asarray(self.transform_.metadata["explained_variance_ratio"])
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_samples(self.transform_, check_array(X, dtype=np.float64))

    def inverse_transform(self, Y):
        check_is_fitted(self, "transform_")
        Y = check_array(Y, dtype=np.float64)
        return Y @ self.components_ + self.mean_
