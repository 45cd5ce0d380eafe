"""Seeded synthetic hyperspectral scenes with Gaussian class models.

Random streams are numpy ``PCG64`` generators seeded with
``SeedSequence(seed, spawn_key=(k,))``: ``k = 0`` drives pixel placement and
background noise, ``k = c`` drives the pixels of class ``c`` (1-based). Each
class stream draws its latent factors first, then its noise, row-major.

A class pixel is ``mean + covariance_scale * (z @ axes) + noise_sigma * e``
with ``z`` and ``e`` standard normal. Without ``axes`` the class spread is
isotropic (``axes`` = identity). Unlabeled pixels are pure noise around zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import IoError, SpecInvalid
from .hsio import HyperCube, LabelRaster


@dataclass
class ClassSpec:
    mean: np.ndarray
    pixel_fraction: float
    covariance_scale: float = 0.0
    axes: Optional[np.ndarray] = None
    name: Optional[str] = None


@dataclass
class SceneSpec:
    width: int
    height: int
    bands: int
    classes: List[ClassSpec]
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if min(self.width, self.height, self.bands) < 1:
            raise SpecInvalid("width, height and bands must be positive")
        if not self.classes:
            raise SpecInvalid("at least one class is required")
        if self.noise_sigma < 0:
            raise SpecInvalid("noise_sigma must be non-negative")
        fractions = [c.pixel_fraction for c in self.classes]
        if min(fractions) < 0:
            raise SpecInvalid("pixel fractions must be non-negative")
        if sum(fractions) > 1.0 + 1e-12:
            raise SpecInvalid(f"pixel fractions sum to {sum(fractions)} > 1")
        for i, c in enumerate(self.classes, start=1):
            if np.shape(c.mean) != (self.bands,):
                raise SpecInvalid(f"class {i}: mean must have {self.bands} entries")
            if c.covariance_scale < 0:
                raise SpecInvalid(f"class {i}: covariance_scale must be non-negative")
            if c.axes is not None:
                axes = np.asarray(c.axes)
                if axes.ndim != 2 or axes.shape[1] != self.bands:
                    raise SpecInvalid(f"class {i}: axes must have shape (r, {self.bands})")

    def class_counts(self) -> List[int]:
        n = self.width * self.height
        counts = [int(round(c.pixel_fraction * n)) for c in self.classes]
        if sum(counts) > n:
            raise SpecInvalid(f"rounded class counts {sum(counts)} exceed {n} pixels")
        return counts

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneSpec":
        try:
            classes = [
                ClassSpec(
                    mean=np.asarray(c["mean"], dtype=np.float64),
                    pixel_fraction=float(c["pixel_fraction"]),
                    covariance_scale=float(c.get("covariance_scale", 0.0)),
                    axes=None if c.get("axes") is None else np.asarray(c["axes"], dtype=np.float64),
                    name=c.get("name"),
                )
                for c in doc["classes"]
            ]
            spec = cls(
                width=int(doc["width"]),
                height=int(doc["height"]),
                bands=int(doc["bands"]),
                classes=classes,
                noise_sigma=float(doc.get("noise_sigma", 0.0)),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalid(f"bad scene spec: {exc}") from exc
        spec.validate()
        return spec


def load_scene_spec(path) -> SceneSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"{path}: {exc}") from exc
    return SceneSpec.from_dict(doc)


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def generate(spec: SceneSpec):
    """Render ``spec`` into a (HyperCube, LabelRaster) pair; same spec, same bytes."""
    spec.validate()
    counts = spec.class_counts()
    n_pix = spec.width * spec.height
    bands = spec.bands

    placement = _stream(spec.seed, 0)
    order = placement.permutation(n_pix)
    pixels = spec.noise_sigma * placement.standard_normal((n_pix, bands))
    labels = np.zeros(n_pix, dtype=np.uint16)

    start = 0
    for c, (cls_spec, count) in enumerate(zip(spec.classes, counts), start=1):
        where = order[start:start + count]
        start += count
        labels[where] = c
        rng = _stream(spec.seed, c)
        axes = np.eye(bands) if cls_spec.axes is None else np.asarray(cls_spec.axes, dtype=np.float64)
        z = rng.standard_normal((count, axes.shape[0]))
        noise = rng.standard_normal((count, bands))
        pixels[where] = (
            np.asarray(cls_spec.mean, dtype=np.float64)
            + cls_spec.covariance_scale * (z @ axes)
            + spec.noise_sigma * noise
        )

    names = [c.name or f"class_{i}" for i, c in enumerate(spec.classes, start=1)]
    cube = HyperCube.from_pixels(pixels, spec.height, spec.width)
    raster = LabelRaster(labels.reshape(spec.height, spec.width), names)
    return cube, raster
