"""Class-wise PCA and baseline feature extraction for hyperspectral cubes."""
from .classifier import MlpConfig, SoftmaxMLP, TrainedModel, predict, train
from .hsio import (
    HyperCube,
    LabelRaster,
    SplitAssignment,
    cube_to_samples,
    load_cube,
    load_labels,
    save_cube,
    save_labels,
    stratified_split,
)
from .linalg import CovarianceStats, EigenDecomposition, covariance, eigh_symmetric
from .metrics import EvalReport, evaluate, weak_classes
from .transforms import (
    LDA,
    PCA,
    ClassWisePCA,
    FastICA,
    LinearTransform,
    apply,
    apply_samples,
    fit_cwpca,
    fit_ica,
    fit_lda,
    fit_pca,
)

__version__ = "0.1.0"
