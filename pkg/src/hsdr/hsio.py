"""Hyperspectral cube and label raster I/O, train/test splits, sample extraction.

HSDR container layout (all integers little-endian)::

    magic   4 bytes  b"HSDR"
    version u8       1
    kind    u8       1 = float32 cube, 2 = uint16 labels
    width   u32
    height  u32
    bands   u32      (1 for labels)
    payload width*height*bands elements, band-sequential:
            band b, row y, column x -> ((b*height + y)*width + x)
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyClass, FormatError, IoError, NonFinite

MAGIC = b"HSDR"
VERSION = 1
KIND_CUBE = 1
KIND_LABELS = 2
_HEADER = struct.Struct("<4sBBIII")

TRAIN = 1
TEST = 2

INDIAN_PINES_CLASSES = [
    "Alfalfa", "Corn-notill", "Corn-mintill", "Corn", "Grass-pasture",
    "Grass-trees", "Grass-pasture-mowed", "Hay-windrowed", "Oats",
    "Soybean-notill", "Soybean-mintill", "Soybean-clean", "Wheat", "Woods",
    "Buildings-Grass-Trees-Drives", "Stone-Steel-Towers",
]


@dataclass(frozen=True, eq=False)
class HyperCube:
    """Spectral image stored band-sequentially as float32 of shape (bands, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype="<f4")
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionMismatch(f"cube data must be 3-D and non-empty, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("cube contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_pixels(cls, pixels, height: int, width: int) -> "HyperCube":
        """Build from a (height*width, bands) matrix in raster-scan order."""
        px = np.asarray(pixels, dtype=np.float32)
        if px.ndim != 2 or px.shape[0] != height * width:
            raise DimensionMismatch(
                f"expected {height * width} pixel rows, got shape {px.shape}"
            )
        return cls(px.T.reshape(px.shape[1], height, width))

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def pixels(self) -> np.ndarray:
        """All spectra as a (height*width, bands) matrix, raster-scan order."""
        return self.data.reshape(self.bands, -1).T

    def __eq__(self, other):
        return isinstance(other, HyperCube) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class LabelRaster:
    """Per-pixel class ids (uint16, shape (height, width)); 0 marks unlabeled pixels."""

    labels: np.ndarray
    class_names: Optional[list] = None

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.ndim != 2 or min(raw.shape) < 1:
            raise DimensionMismatch(f"label raster must be 2-D and non-empty, got {raw.shape}")
        if raw.size and (raw.min() < 0 or raw.max() > np.iinfo(np.uint16).max):
            raise FormatError("labels must fit in uint16")
        object.__setattr__(self, "labels", np.ascontiguousarray(raw, dtype="<u2"))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())

    def class_counts(self) -> np.ndarray:
        """Pixel count for classes 1..N (index 0 of the result is class 1)."""
        return np.bincount(self.labels.ravel(), minlength=self.n_classes + 1)[1:]

    def name_of(self, class_id: int) -> str:
        if self.class_names and 1 <= class_id <= len(self.class_names):
            return self.class_names[class_id - 1]
        return f"class_{class_id}"

    def __eq__(self, other):
        return isinstance(other, LabelRaster) and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class SplitAssignment:
    """Per-pixel partition: 0 = unlabeled, 1 = train, 2 = test."""

    assignment: np.ndarray
    seed: int
    train_fraction: float

    @property
    def train_mask(self) -> np.ndarray:
        return self.assignment == TRAIN

    @property
    def test_mask(self) -> np.ndarray:
        return self.assignment == TEST

    def __eq__(self, other):
        return (
            isinstance(other, SplitAssignment)
            and self.seed == other.seed
            and self.train_fraction == other.train_fraction
            and np.array_equal(self.assignment, other.assignment)
        )


def _write(path, kind: int, array: np.ndarray, width: int, height: int, bands: int) -> None:
    header = _HEADER.pack(MAGIC, VERSION, kind, width, height, bands)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(array.tobytes(order="C"))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read(path, expected_kind: int):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than HSDR header")
    magic, version, kind, width, height, bands = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind != expected_kind:
        raise FormatError(f"{path}: payload kind {kind}, expected {expected_kind}")
    if min(width, height, bands) < 1:
        raise FormatError(f"{path}: zero dimension in header")
    dtype = np.dtype("<f4") if kind == KIND_CUBE else np.dtype("<u2")
    n = width * height * bands
    payload = blob[_HEADER.size:]
    if len(payload) != n * dtype.itemsize:
        raise DimensionMismatch(
            f"{path}: payload has {len(payload)} bytes, header implies {n * dtype.itemsize}"
        )
    return np.frombuffer(payload, dtype=dtype).copy(), width, height, bands


def save_cube(cube: HyperCube, path) -> None:
    _write(path, KIND_CUBE, cube.data, cube.width, cube.height, cube.bands)


def load_cube(path) -> HyperCube:
    data, width, height, bands = _read(path, KIND_CUBE)
    return HyperCube(data.reshape(bands, height, width))


def save_labels(raster: LabelRaster, path) -> None:
    _write(path, KIND_LABELS, raster.labels, raster.width, raster.height, 1)


def load_labels(path, class_names: Optional[Sequence[str]] = None) -> LabelRaster:
    data, width, height, bands = _read(path, KIND_LABELS)
    if bands != 1:
        raise FormatError(f"{path}: label file declares {bands} bands")
    return LabelRaster(data.reshape(height, width), list(class_names) if class_names else None)


def _check_aligned(cube: HyperCube, raster: LabelRaster) -> None:
    if (cube.height, cube.width) != (raster.height, raster.width):
        raise DimensionMismatch(
            f"cube is {cube.height}x{cube.width}, labels are {raster.height}x{raster.width}"
        )


def stratified_counts(total: int, train_fraction: float) -> int:
    n = int(round(train_fraction * total))
    if total >= 2:
        n = max(n, 1)
    return n


def stratified_indices(labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """Split positions of ``labels`` per class; returns (selected, rest) index arrays.

    Classes are visited in ascending order and each draws one permutation from
    ``rng``, so the result depends only on the labels and the generator state.
    """
    labels = np.asarray(labels)
    chosen, rest = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = idx[rng.permutation(idx.size)]
        k = stratified_counts(idx.size, fraction)
        chosen.append(np.sort(perm[:k]))
        rest.append(np.sort(perm[k:]))
    if not chosen:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    return np.sort(np.concatenate(chosen)), np.sort(np.concatenate(rest))


def stratified_split(raster: LabelRaster, train_fraction: float, seed: int) -> SplitAssignment:
    """Per-class random train/test partition of the labeled pixels.

    Each class keeps ``round(train_fraction * total)`` training pixels, clamped so
    that a class with at least two pixels has at least one in each partition.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    counts = raster.class_counts()
    if counts.size == 0:
        raise EmptyClass("raster has no labeled pixels")
    missing = [i + 1 for i, n in enumerate(counts) if n == 0]
    if missing:
        raise EmptyClass(f"classes without pixels: {missing}")
    flat = raster.labels.ravel()
    labeled = np.flatnonzero(flat)
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    train, test = stratified_indices(flat[labeled], train_fraction, rng)
    assignment = np.zeros(flat.size, dtype=np.uint8)
    assignment[labeled[train]] = TRAIN
    assignment[labeled[test]] = TEST
    return SplitAssignment(assignment.reshape(raster.labels.shape), int(seed), float(train_fraction))


def save_split(split: SplitAssignment, path) -> None:
    flat = split.assignment.ravel()
    doc = {
        "seed": split.seed,
        "train_fraction": split.train_fraction,
        "height": int(split.assignment.shape[0]),
        "width": int(split.assignment.shape[1]),
        "train": np.flatnonzero(flat == TRAIN).tolist(),
        "test": np.flatnonzero(flat == TEST).tolist(),
    }
    try:
        Path(path).write_text(json.dumps(doc) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_split(path) -> SplitAssignment:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    flat = np.zeros(doc["height"] * doc["width"], dtype=np.uint8)
    flat[np.asarray(doc["train"], dtype=np.intp)] = TRAIN
    flat[np.asarray(doc["test"], dtype=np.intp)] = TEST
    return SplitAssignment(flat.reshape(doc["height"], doc["width"]), doc["seed"], doc["train_fraction"])


def cube_to_samples(cube: HyperCube, raster: LabelRaster, subset: str = "all-labeled",
                    split: Optional[SplitAssignment] = None):
    """Select pixel spectra as a sample matrix.

    Parameters
    ----------
    subset : {"all-labeled", "train", "test"}
        ``train`` and ``test`` need ``split``.

    Returns
    -------
    samples : ndarray of shape (M, bands), float64
    labels : ndarray of shape (M,)
    coords : ndarray of shape (M, 2)
        (row, column) of each sample; rows follow raster-scan order.
    """
    _check_aligned(cube, raster)
    mask = raster.labels > 0
    if subset in ("train", "test"):
        if split is None:
            raise ValueError(f"subset {subset!r} requires a split")
        if split.assignment.shape != raster.labels.shape:
            raise DimensionMismatch("split does not match raster dimensions")
        mask = mask & (split.assignment == (TRAIN if subset == "train" else TEST))
    elif subset != "all-labeled":
        raise ValueError(f"unknown subset {subset!r}")
    flat = np.flatnonzero(mask.ravel())
    samples = cube.pixels()[flat].astype(np.float64)
    labels = raster.labels.ravel()[flat].astype(np.int64)
    coords = np.stack(np.unravel_index(flat, mask.shape), axis=1)
    return samples, labels, coords


def _read_matrix(path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".npy":
            return np.load(path)
        if suffix == ".mat":
            from scipy.io import loadmat

            arrays = [v for k, v in loadmat(path).items() if not k.startswith("__")]
            if len(arrays) != 1:
                raise FormatError(f"{path}: expected exactly one variable, found {len(arrays)}")
            return np.asarray(arrays[0])
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def convert(input_path, labels_path, output_dir, class_names: Optional[Sequence[str]] = None):
    """Convert an exported cube and ground-truth grid into HSDR files.

    The label file is a height x width grid of integer ids. The cube file is
    either a (height*width) x bands matrix in raster-scan order (CSV) or a
    (height, width, bands) array (``.npy`` / single-variable ``.mat``).

    Writes ``cube.hsdr`` and ``labels.hsdr`` into ``output_dir`` and returns
    their paths.
    """
    labels = _read_matrix(labels_path)
    if labels.ndim != 2:
        raise DimensionMismatch(f"label grid must be 2-D, got {labels.shape}")
    if not np.all(labels == np.round(labels)):
        raise FormatError("label grid contains non-integer values")
    raster = LabelRaster(labels.astype(np.int64), list(class_names) if class_names else None)
    values = _read_matrix(input_path)
    if values.ndim == 3:
        if values.shape[:2] != labels.shape:
            raise DimensionMismatch(f"cube {values.shape} does not match labels {labels.shape}")
        cube = HyperCube(np.transpose(values, (2, 0, 1)))
    else:
        cube = HyperCube.from_pixels(values, raster.height, raster.width)
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    save_cube(cube, out / "cube.hsdr")
    save_labels(raster, out / "labels.hsdr")
    return out / "cube.hsdr", out / "labels.hsdr"
