from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import InsufficientClassSamples, InvalidK, SingularScatter
from ..linalg import canonical_signs, eigh_symmetric
from ._base import LinearTransform, apply_samples

REG_SCALE = 1e-6


def scatter_matrices(x: np.ndarray, y: np.ndarray, classes):
    """Within-class and between-class scatter (sums, not averages)."""
    mu = x.mean(axis=0)
    n_bands = x.shape[1]
    sw = np.zeros((n_bands, n_bands))
    sb = np.zeros((n_bands, n_bands))
    for c in classes:
        xc = x[y == c]
        mc = xc.mean(axis=0)
        d = xc - mc
        sw += d.T @ d
        diff = mc - mu
        sb += xc.shape[0] * np.outer(diff, diff)
    return 0.5 * (sw + sw.T), 0.5 * (sb + sb.T)


def fit_lda(samples, labels, k: int) -> LinearTransform:
    """Fisher discriminant directions maximizing between- over within-class scatter.

    Solves the generalized problem ``S_b v = lambda S_w v`` by whitening with
    the regularized ``S_w = V diag(w) V^T``, diagonalizing
    ``W^T S_b W`` with ``W = V diag(w)^(-1/2)``, and mapping back. Rows of the
    projection are the directions ``W q_i`` scaled to unit length.

    ``S_w`` gets ``eps * I`` added, ``eps = 1e-6 * trace(S_w) / L``.
    """
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError(f"samples {x.shape} and labels {y.shape} do not align")
    classes = np.unique(y)
    n_bands = x.shape[1]
    if not 1 <= k <= min(len(classes), n_bands):
        raise InvalidK(f"k={k} outside [1, min(n_classes={len(classes)}, bands={n_bands})]")
    for c in classes:
        n_c = int(np.sum(y == c))
        if n_c < 2:
            raise InsufficientClassSamples(int(c), n_c)

    sw, sb = scatter_matrices(x, y, classes)
    trace = float(np.trace(sw))
    if trace <= 0.0:
        raise SingularScatter("within-class scatter has zero trace")
    eps = REG_SCALE * trace / n_bands
    sw_reg = sw + eps * np.eye(n_bands)

    within = eigh_symmetric(sw_reg)
    whiten = within.eigenvectors / np.sqrt(within.eigenvalues)
    between = whiten.T @ sb @ whiten
    between = 0.5 * (between + between.T)
    gen = eigh_symmetric(between)
    directions = whiten @ gen.eigenvectors[:, :k]
    directions /= np.linalg.norm(directions, axis=0)
    directions = canonical_signs(directions)

    return LinearTransform(
        method="lda",
        mean=x.mean(axis=0),
        projection=directions.T,
        metadata={
            "classes": [int(c) for c in classes],
            "fisher_ratios": gen.eigenvalues[:k].tolist(),
            "regularization": eps,
        },
    )


class LDA(TransformerMixin, BaseEstimator):
    """Fisher linear discriminant projection (``n_components`` up to the class count)."""

    def __init__(self, n_components=15):
        self.n_components = n_components

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.transform_ = fit_lda(X, y, self.n_components)
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        self.scalings_ = self.transform_.projection.T
        self.mean_ = self.transform_.mean
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_samples(self.transform_, check_array(X, dtype=np.float64))
