from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._persist import read_container, write_container
from ..errors import DimensionMismatch, FormatError
from ..hsio import HyperCube

METHODS = ("pca", "ica", "lda", "cwpca")


@dataclass(frozen=True, eq=False)
class LinearTransform:
    """Fitted affine projection ``y = projection @ (x - mean) + offset``.

    ``projection`` has one row per output feature. ``offset`` is zero for every
    method except CW-PCA, which folds its per-class centering into it.
    """

    method: str
    mean: np.ndarray
    projection: np.ndarray
    offset: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        proj = np.atleast_2d(np.asarray(self.projection, dtype=np.float64))
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        if proj.shape[1] != mean.shape[0]:
            raise DimensionMismatch(f"projection {proj.shape} vs mean {mean.shape}")
        if not np.all(np.isfinite(proj)):
            raise ValueError("projection has non-finite entries")
        offset = np.zeros(proj.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=np.float64).ravel()
        if offset.shape[0] != proj.shape[0]:
            raise DimensionMismatch(f"offset {offset.shape} vs projection {proj.shape}")
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "offset", offset)

    @property
    def input_bands(self) -> int:
        return self.projection.shape[1]

    @property
    def output_bands(self) -> int:
        return self.projection.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, LinearTransform)
            and self.method == other.method
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.projection, other.projection)
            and np.array_equal(self.offset, other.offset)
            and self.metadata == other.metadata
        )


def apply_samples(t: LinearTransform, samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != t.input_bands:
        raise DimensionMismatch(f"expected (M, {t.input_bands}) samples, got {x.shape}")
    return (x - t.mean) @ t.projection.T + t.offset


def apply(t: LinearTransform, cube: HyperCube) -> HyperCube:
    """Project every pixel of ``cube``, labeled or not; output keeps the spatial grid."""
    if cube.bands != t.input_bands:
        raise DimensionMismatch(f"cube has {cube.bands} bands, transform expects {t.input_bands}")
    out = apply_samples(t, cube.pixels())
    return HyperCube.from_pixels(out, cube.height, cube.width)


def save_transform(t: LinearTransform, path) -> None:
    header = {
        "kind": "linear-transform",
        "method": t.method,
        "input_bands": t.input_bands,
        "output_bands": t.output_bands,
        "metadata": t.metadata,
    }
    write_container(path, "HSDT", header, {"mean": t.mean, "projection": t.projection, "offset": t.offset})


def load_transform(path) -> LinearTransform:
    doc, arrays = read_container(path, "HSDT")
    try:
        t = LinearTransform(
            method=doc["method"],
            mean=arrays["mean"],
            projection=arrays["projection"],
            offset=arrays["offset"],
            metadata=doc.get("metadata", {}),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc
    if (t.input_bands, t.output_bands) != (doc["input_bands"], doc["output_bands"]):
        raise FormatError(f"{path}: header dimensions disagree with payload")
    return t
