"""End-to-end comparison run: split, fit each method, reduce, train, evaluate, report."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import hsio
from .classifier import DEFAULT_HIDDEN, MlpConfig, predict, save_model, train, write_history_csv
from .errors import ConfigError, HsdrError, IoError
from .hsio import HyperCube, LabelRaster, SplitAssignment
from .metrics import (
    WEAK_CLASS_THRESHOLD,
    EvalReport,
    evaluate,
    weak_classes,
    write_report_csv,
    write_report_json,
)
from .transforms import LinearTransform, apply, apply_samples, fit_cwpca, fit_ica, fit_lda, fit_pca, save_transform

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2

STANDARD_METHODS = ("ica:15", "pca:15", "lda:15", "cwpca:1:masked")

# Published Indian Pines (OA, AA) for the standard settings; shown for context, never asserted.
REFERENCE_SCORES = {
    "ica:15": (0.8943, 0.8148),
    "pca:15": (0.9153, 0.8479),
    "lda:15": (0.9643, 0.9012),
    "cwpca:1:masked": (0.9995, 0.9982),
}


@dataclass(frozen=True)
class MethodSpec:
    """One feature-extraction run, written as ``pca:15``, ``ica:15``, ``lda:15`` or ``cwpca:1:masked``."""

    name: str
    size: int
    mode: str = "masked"

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        parts = text.strip().lower().split(":")
        name = parts[0]
        if name not in ("pca", "ica", "lda", "cwpca"):
            raise ConfigError(f"unknown method {parts[0]!r} in {text!r}")
        expected = (2, 3) if name == "cwpca" else (2,)
        if len(parts) not in expected:
            raise ConfigError(f"malformed method spec {text!r}")
        try:
            size = int(parts[1])
        except ValueError:
            raise ConfigError(f"method size must be an integer in {text!r}") from None
        if size < 1:
            raise ConfigError(f"method size must be >= 1 in {text!r}")
        mode = parts[2] if len(parts) == 3 else "masked"
        if mode not in ("masked", "literal"):
            raise ConfigError(f"cwpca mode must be masked or literal in {text!r}")
        return cls(name, size, mode)

    @property
    def label(self) -> str:
        return f"{self.name}:{self.size}:{self.mode}" if self.name == "cwpca" else f"{self.name}:{self.size}"

    @property
    def dirname(self) -> str:
        return self.label.replace(":", "_")


@dataclass
class ClassifierSettings:
    hidden_layers: List[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    activation: str = "relu"
    learning_rate: float = 0.01
    epochs: int = 90
    batch_size: int = 64
    seed: Optional[int] = None
    validation_fraction: float = 0.1

    def mlp_config(self, n_features: int, n_classes: int, default_seed: int) -> MlpConfig:
        return MlpConfig(
            layer_sizes=(n_features, *self.hidden_layers, n_classes),
            activation=self.activation,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=default_seed if self.seed is None else self.seed,
            validation_fraction=self.validation_fraction,
        )


@dataclass
class PipelineConfig:
    """Everything a comparison run depends on.

    ``seed`` feeds the split, ICA initialization and classifier unless
    ``split_seed``, ``ica_seed`` or ``classifier.seed`` override it.
    """

    cube: str
    labels: str
    output_dir: str
    methods: List[str] = field(default_factory=lambda: list(STANDARD_METHODS))
    seed: int = 0
    train_fraction: float = 0.7
    split_seed: Optional[int] = None
    split_file: Optional[str] = None
    ica_seed: Optional[int] = None
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    class_names: Optional[List[str]] = None
    weak_threshold: float = WEAK_CLASS_THRESHOLD
    save_reduced_cube: bool = True
    reference_rows: bool = True

    def __post_init__(self):
        if isinstance(self.classifier, dict):
            known = {f.name for f in fields(ClassifierSettings)}
            unknown = set(self.classifier) - known
            if unknown:
                raise ConfigError(f"unknown classifier keys: {sorted(unknown)}")
            self.classifier = ClassifierSettings(**self.classifier)
        if not self.methods:
            raise ConfigError("at least one method is required")
        self.method_specs = [MethodSpec.parse(m) for m in self.methods]
        labels = [m.label for m in self.method_specs]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate methods in {labels}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if not 0.0 < self.weak_threshold < 1.0:
            raise ConfigError("weak_threshold must be in (0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"cube", "labels", "output_dir"} - set(doc)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["classifier"] = asdict(self.classifier)
        return doc

    def digest(self) -> str:
        """SHA-256 of the settings that influence results (paths excluded)."""
        doc = self.to_dict()
        for key in ("cube", "labels", "output_dir", "split_file"):
            doc.pop(key)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    @property
    def effective_split_seed(self) -> int:
        return self.seed if self.split_seed is None else self.split_seed

    @property
    def effective_ica_seed(self) -> int:
        return self.seed if self.ica_seed is None else self.ica_seed


def load_config(path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return PipelineConfig.from_dict(doc)


def fit_method(spec: MethodSpec, cube: HyperCube, raster: LabelRaster, split: SplitAssignment,
               ica_seed: int = 0) -> LinearTransform:
    """Fit one method on the training pixels only."""
    if spec.name == "cwpca":
        return fit_cwpca(cube, raster, split, m=spec.size, mode=spec.mode)
    x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
    if spec.name == "pca":
        return fit_pca(x, spec.size)
    if spec.name == "lda":
        return fit_lda(x, y, spec.size)
    return fit_ica(x, spec.size, seed=ica_seed)


def fit_and_train(spec: MethodSpec, cube: HyperCube, raster: LabelRaster, split: SplitAssignment,
                  config: PipelineConfig):
    """Fitted transform and trained classifier for one method; sees training labels only."""
    transform = fit_method(spec, cube, raster, split, config.effective_ica_seed)
    x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
    features = apply_samples(transform, x)
    mlp_cfg = config.classifier.mlp_config(transform.output_bands, raster.n_classes, config.seed)
    model = train(features, y, mlp_cfg)
    return transform, model


def _run_method(spec, cube, raster, split, config, weak_ids, outdir: Path) -> EvalReport:
    outdir.mkdir(parents=True, exist_ok=True)
    transform, model = fit_and_train(spec, cube, raster, split, config)
    save_transform(transform, outdir / "transform.hsdt")
    save_model(model, outdir / "model.hsdm")
    write_history_csv(model, outdir / "history.csv")
    if config.save_reduced_cube:
        hsio.save_cube(apply(transform, cube), outdir / "reduced.hsdr")

    x_test, y_test, _ = hsio.cube_to_samples(cube, raster, "test", split)
    predicted, _ = predict(model, apply_samples(transform, x_test))
    report = evaluate(
        y_test, predicted, raster.n_classes, method=spec.label,
        metadata={
            "output_bands": transform.output_bands,
            "split_seed": split.seed,
            "train_fraction": split.train_fraction,
            "classifier": {**asdict(model.config), "layer_sizes": list(model.config.layer_sizes)},
            "ica_seed": config.effective_ica_seed if spec.name == "ica" else None,
            "config_digest": config.digest(),
        },
    )
    report.weak_class_ids = list(weak_ids)
    write_report_json(report, outdir / "report.json")
    write_report_csv(report, outdir / "report.csv", raster.class_names)
    return report


def comparison_table(results: Dict[str, Optional[EvalReport]], n_classes: int,
                     failures: Optional[Dict[str, str]] = None, reference: bool = True) -> str:
    """CSV with one row per method: OA, AA and every per-class accuracy.

    With ``reference``, methods run at a standard setting get an extra
    ``published`` row carrying the literature OA/AA on Indian Pines.
    """
    failures = failures or {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "status", "output_bands", "OA", "AA"]
                    + [f"class_{c}" for c in range(1, n_classes + 1)])
    for label, report in results.items():
        if report is None:
            writer.writerow([label, "failed: " + failures.get(label, ""), "", "", ""] + [""] * n_classes)
            continue
        per_class = ["" if report.accuracy_of(c) is None else repr(report.accuracy_of(c))
                     for c in range(1, n_classes + 1)]
        writer.writerow([label, "ok", report.metadata.get("output_bands", ""),
                         repr(report.overall_accuracy), repr(report.average_accuracy)] + per_class)
    if reference:
        for label in results:
            if label in REFERENCE_SCORES:
                oa, aa = REFERENCE_SCORES[label]
                writer.writerow([label, "published (Indian Pines)", "", repr(oa), repr(aa)] + [""] * n_classes)
    return buf.getvalue()


def report_weak_classes(reports: Sequence[EvalReport], raster: LabelRaster,
                        threshold: float = WEAK_CLASS_THRESHOLD) -> str:
    """CSV of per-class accuracy for the weak classes; one column per report."""
    if not reports:
        raise ValueError("at least one report is required")
    weak = weak_classes(raster, threshold)
    names = [r.method or f"run_{i}" for i, r in enumerate(reports, start=1)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_id", "name"] + names)
    if not weak:
        writer.writerow(["", f"no class below {threshold:.2%} of labeled pixels"] + [""] * len(reports))
    for c in weak:
        cells = []
        for r in reports:
            acc = r.accuracy_of(c) if c <= r.n_classes else None
            cells.append("" if acc is None else repr(acc))
        writer.writerow([c, raster.name_of(c)] + cells)
    return buf.getvalue()


@dataclass
class PipelineResult:
    exit_code: int
    reports: Dict[str, Optional[EvalReport]]
    failures: Dict[str, str]


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every configured method and write all artifacts under ``config.output_dir``.

    A failing method is logged, recorded in the comparison table and skipped;
    the exit code is then 2.
    """
    cube = hsio.load_cube(config.cube)
    raster = hsio.load_labels(config.labels, config.class_names)
    if config.split_file:
        split = hsio.load_split(config.split_file)
    else:
        split = hsio.stratified_split(raster, config.train_fraction, config.effective_split_seed)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    hsio.save_split(split, out / "split.json")
    weak_ids = weak_classes(raster, config.weak_threshold)

    results: Dict[str, Optional[EvalReport]] = {}
    failures: Dict[str, str] = {}
    for spec in config.method_specs:
        log.info("running %s", spec.label)
        try:
            results[spec.label] = _run_method(spec, cube, raster, split, config, weak_ids, out / spec.dirname)
        except (HsdrError, ValueError, ArithmeticError) as exc:
            log.error("%s failed: %s", spec.label, exc)
            results[spec.label] = None
            failures[spec.label] = f"{type(exc).__name__}: {exc}"

    (out / "comparison.csv").write_text(comparison_table(results, raster.n_classes, failures,
                                                              config.reference_rows))
    ok = [r for r in results.values() if r is not None]
    if ok:
        (out / "weak_classes.csv").write_text(report_weak_classes(ok, raster, config.weak_threshold))
    summary = {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "split": {"seed": split.seed, "train_fraction": split.train_fraction,
                  "n_train": int(split.train_mask.sum()), "n_test": int(split.test_mask.sum())},
        "weak_classes": weak_ids,
        "methods": {
            label: (r.to_dict() if r is not None else {"failed": failures[label]})
            for label, r in results.items()
        },
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return PipelineResult(EXIT_PARTIAL if failures else EXIT_OK, results, failures)
