"""Class-wise PCA: one PCA per class, leading components concatenated.

With N classes and ``m`` components kept per class the output has ``m * N``
features. Block ``c`` (rows ``c*m`` to ``(c+1)*m``) comes from the PCA of
class ``c`` alone, centred on that class, so the whole map is a single
matrix product plus an offset vector and can be applied to unlabeled pixels.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import InsufficientClassSamples, InvalidM
from ..hsio import HyperCube, LabelRaster, SplitAssignment, cube_to_samples
from ..linalg import CovarianceStats
from ._base import LinearTransform, apply_samples
from .pca import fit_pca, pca_from_stats

MODES = ("masked", "literal")


def _zero_filled_stats(class_samples: np.ndarray, scene_pixels: int) -> CovarianceStats:
    """Mean and covariance of a scene where only ``class_samples`` are non-zero.

    Equivalent to stacking ``scene_pixels - len(class_samples)`` zero rows
    under the class pixels and taking the population covariance.
    """
    n = scene_pixels
    mean = class_samples.sum(axis=0) / n
    second = (class_samples.T @ class_samples) / n
    cov = second - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    return CovarianceStats(count=n, mean=mean, covariance=cov)


def fit_cwpca_samples(samples, labels, m: int = 1, mode: str = "masked",
                      classes=None, scene_pixels=None) -> LinearTransform:
    """Fit CW-PCA on labeled training samples.

    Parameters
    ----------
    samples : array of shape (M, L)
    labels : array of shape (M,)
    m : int
        Components kept per class.
    mode : {"masked", "literal"}
        ``masked`` uses each class's pixels only. ``literal`` computes the
        statistics over a scene of ``scene_pixels`` pixels in which every
        pixel outside the class is zero.
    classes : sequence of int, optional
        Class order of the output blocks; defaults to the sorted unique labels.
        A class listed here but absent from ``labels`` is an error.
    scene_pixels : int, optional
        Scene size for ``literal`` mode; defaults to M.
    """
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError(f"samples {x.shape} and labels {y.shape} do not align")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    classes = np.unique(y) if classes is None else np.asarray(classes)
    n_classes = len(classes)
    n_bands = x.shape[1]
    if m < 1 or m * n_classes > n_bands:
        raise InvalidM(f"m={m} with {n_classes} classes gives {m * n_classes} outputs, input has {n_bands} bands")
    scene = x.shape[0] if scene_pixels is None else int(scene_pixels)
    if scene < x.shape[0]:
        raise ValueError(f"scene_pixels={scene} smaller than the number of samples {x.shape[0]}")

    rows, offsets, per_class = [], [], []
    for c in classes:
        xc = x[y == c]
        if xc.shape[0] < 2:
            raise InsufficientClassSamples(int(c), int(xc.shape[0]))
        if mode == "masked":
            block = fit_pca(xc, m)
        else:
            block = pca_from_stats(_zero_filled_stats(xc, scene), m)
        rows.append(block.projection)
        offsets.append(-block.projection @ block.mean)
        per_class.append({
            "class": int(c),
            "n_samples": int(xc.shape[0]),
            "explained_variance": block.metadata["explained_variance"],
        })

    return LinearTransform(
        method="cwpca",
        mean=np.zeros(n_bands),
        projection=np.vstack(rows),
        offset=np.concatenate(offsets),
        metadata={
            "components_per_class": int(m),
            "classes": [int(c) for c in classes],
            "mode": mode,
            "scene_pixels": scene,
            "per_class": per_class,
        },
    )


def fit_cwpca(cube: HyperCube, raster: LabelRaster, split: SplitAssignment,
              m: int = 1, mode: str = "masked") -> LinearTransform:
    """Fit CW-PCA on the training pixels of a scene; blocks ordered by class id 1..N."""
    samples, labels, _ = cube_to_samples(cube, raster, "train", split)
    classes = np.arange(1, raster.n_classes + 1)
    return fit_cwpca_samples(samples, labels, m=m, mode=mode, classes=classes,
                             scene_pixels=cube.height * cube.width)


class ClassWisePCA(TransformerMixin, BaseEstimator):
    """Supervised PCA fitted separately on each class.

    Parameters
    ----------
    n_components_per_class : int, default=1
    mode : {"masked", "literal"}, default="masked"
    scene_pixels : int or None
        Scene size used by ``literal`` mode; ``None`` means the training set size.
    """

    def __init__(self, n_components_per_class=1, mode="masked", scene_pixels=None):
        self.n_components_per_class = n_components_per_class
        self.mode = mode
        self.scene_pixels = scene_pixels

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.transform_ = fit_cwpca_samples(
            X, y, m=self.n_components_per_class, mode=self.mode, scene_pixels=self.scene_pixels
        )
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        self.components_ = self.transform_.projection
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_samples(self.transform_, check_array(X, dtype=np.float64))
