"""Feature extraction: PCA, class-wise PCA, Fisher LDA and FastICA.

Each method has a functional form returning a :class:`LinearTransform`
(``fit_pca``, ``fit_cwpca``, ``fit_lda``, ``fit_ica``) and a scikit-learn
style estimator wrapping it (``PCA``, ``ClassWisePCA``, ``LDA``, ``FastICA``).
"""
from ._base import LinearTransform, apply, apply_samples, load_transform, save_transform
from .cwpca import ClassWisePCA, fit_cwpca, fit_cwpca_samples
from .ica import FastICA, fit_ica
from .lda import LDA, fit_lda
from .pca import PCA, fit_pca

__all__ = [
    "LinearTransform", "apply", "apply_samples", "load_transform", "save_transform",
    "PCA", "fit_pca", "ClassWisePCA", "fit_cwpca", "fit_cwpca_samples",
    "LDA", "fit_lda", "FastICA", "fit_ica",
]
