"""Command line entry point: ``hsdr <subcommand> ...``.

Exit status: 0 success, 2 when some pipeline methods failed, 1 on
configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import hsio, synth
from .classifier import MlpConfig, load_model, predict, save_model, train, write_history_csv
from .errors import HsdrError
from .metrics import evaluate, read_report_json, write_report_csv, write_report_json
from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    ClassifierSettings,
    MethodSpec,
    PipelineConfig,
    comparison_table,
    fit_method,
    load_config,
    report_weak_classes,
    run_pipeline,
)
from .transforms import apply, load_transform, save_transform


def _read_names(path):
    if not path:
        return None
    return [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]


def cmd_convert(args):
    cube_path, labels_path = hsio.convert(args.input, args.labels, args.output, _read_names(args.names))
    print(f"wrote {cube_path} and {labels_path}")


def cmd_generate(args):
    spec = synth.load_scene_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    cube, raster = synth.generate(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    hsio.save_cube(cube, out / "cube.hsdr")
    hsio.save_labels(raster, out / "labels.hsdr")
    (out / "names.txt").write_text("".join(f"{n}\n" for n in raster.class_names))
    print(f"wrote {cube.width}x{cube.height}x{cube.bands} scene to {out}")


def cmd_split(args):
    raster = hsio.load_labels(args.labels)
    split = hsio.stratified_split(raster, args.train_fraction, args.seed)
    hsio.save_split(split, args.output)
    print(f"train {int(split.train_mask.sum())}, test {int(split.test_mask.sum())}")


def cmd_fit(args):
    cube = hsio.load_cube(args.cube)
    raster = hsio.load_labels(args.labels)
    split = hsio.load_split(args.split)
    t = fit_method(MethodSpec.parse(args.method), cube, raster, split, ica_seed=args.seed)
    save_transform(t, args.output)
    print(f"{t.method}: {t.input_bands} -> {t.output_bands} bands")


def cmd_transform(args):
    t = load_transform(args.transform)
    hsio.save_cube(apply(t, hsio.load_cube(args.cube)), args.output)


def cmd_train(args):
    cube = hsio.load_cube(args.cube)
    raster = hsio.load_labels(args.labels)
    split = hsio.load_split(args.split)
    x, y, _ = hsio.cube_to_samples(cube, raster, "train", split)
    cfg = MlpConfig(
        layer_sizes=(cube.bands, *args.hidden_layers, raster.n_classes),
        activation=args.activation,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        validation_fraction=args.validation_fraction,
    )
    model = train(x, y, cfg)
    save_model(model, args.output)
    if args.history:
        write_history_csv(model, args.history)
    last = model.history[-1]
    print(f"epoch {last.epoch}: train_loss {last.train_loss:.4f} train_acc {last.train_acc:.4f}")


def cmd_evaluate(args):
    cube = hsio.load_cube(args.cube)
    raster = hsio.load_labels(args.labels, _read_names(args.names))
    split = hsio.load_split(args.split)
    model = load_model(args.model)
    x, y, _ = hsio.cube_to_samples(cube, raster, args.subset, split)
    predicted, _ = predict(model, x)
    report = evaluate(y, predicted, raster.n_classes, method=args.method)
    write_report_json(report, args.output)
    if args.csv:
        write_report_csv(report, args.csv, raster.class_names)
    print(f"OA {report.overall_accuracy:.4f}  AA {report.average_accuracy:.4f}")


def _config_from_args(args) -> PipelineConfig:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "cube": args.cube,
        "labels": args.labels,
        "output_dir": args.output_dir,
        "methods": args.methods,
        "seed": args.seed,
        "train_fraction": args.train_fraction,
        "split_file": args.split_file,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    clf = dict(doc.get("classifier", {}))
    for key in ("epochs", "learning_rate", "batch_size"):
        value = getattr(args, key)
        if value is not None:
            clf[key] = value
    if clf:
        doc["classifier"] = clf
    return PipelineConfig.from_dict(doc)


def cmd_run(args):
    config = _config_from_args(args)
    result = run_pipeline(config)
    print(comparison_table(result.reports, next(
        (r.n_classes for r in result.reports.values() if r is not None), 0), result.failures), end="")
    return result.exit_code


def cmd_report(args):
    raster = hsio.load_labels(args.labels, _read_names(args.names))
    paths = list(args.reports)
    if args.run_dir:
        paths += sorted(str(p) for p in Path(args.run_dir).glob("*/report.json"))
    if not paths:
        raise HsdrError("no reports given")
    reports = [read_report_json(p) for p in paths]
    text = report_weak_classes(reports, raster, args.threshold)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsdr", description="Hyperspectral dimensionality reduction toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("convert", help="convert CSV/NPY/MAT exports to HSDR files")
    s.add_argument("--input", required=True, help="cube: CSV of (H*W) x bands rows, or .npy/.mat (H, W, bands)")
    s.add_argument("--labels", required=True, help="ground truth grid, H x W")
    s.add_argument("--output", required=True, help="output directory")
    s.add_argument("--names", help="text file with one class name per line")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("generate", help="render a synthetic scene from a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("split", help="stratified train/test split")
    s.add_argument("--labels", required=True)
    s.add_argument("--train-fraction", type=float, default=0.7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("fit", help="fit a transform on training pixels")
    s.add_argument("--cube", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--method", required=True, help="pca:K, ica:K, lda:K or cwpca:M[:masked|literal]")
    s.add_argument("--seed", type=int, default=0, help="ICA initialization seed")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("transform", help="apply a fitted transform to a cube")
    s.add_argument("--transform", required=True)
    s.add_argument("--cube", required=True)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_transform)

    defaults = ClassifierSettings()
    s = sub.add_parser("train", help="train the reference classifier on a (reduced) cube")
    s.add_argument("--cube", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--history", help="write per-epoch curves as CSV")
    s.add_argument("--hidden-layers", type=int, nargs="*", default=defaults.hidden_layers)
    s.add_argument("--activation", choices=("relu", "tanh"), default=defaults.activation)
    s.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    s.add_argument("--epochs", type=int, default=defaults.epochs)
    s.add_argument("--batch-size", type=int, default=defaults.batch_size)
    s.add_argument("--validation-fraction", type=float, default=defaults.validation_fraction)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a trained model on the test pixels")
    s.add_argument("--model", required=True)
    s.add_argument("--cube", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--subset", choices=("test", "train", "all-labeled"), default="test")
    s.add_argument("--method", help="method label stored in the report")
    s.add_argument("--names")
    s.add_argument("--output", required=True, help="report JSON")
    s.add_argument("--csv", help="per-class CSV")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run", help="full comparison pipeline")
    s.add_argument("--config", help="JSON pipeline config; flags override its keys")
    s.add_argument("--cube")
    s.add_argument("--labels")
    s.add_argument("--output-dir")
    s.add_argument("--methods", nargs="+")
    s.add_argument("--seed", type=int)
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--split-file")
    s.add_argument("--epochs", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--batch-size", type=int)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="weak-class accuracy table from report JSON files")
    s.add_argument("--labels", required=True)
    s.add_argument("--reports", nargs="*", default=[])
    s.add_argument("--run-dir", help="pipeline output directory; picks up */report.json")
    s.add_argument("--threshold", type=float, default=0.01)
    s.add_argument("--names")
    s.add_argument("--output")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except (HsdrError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"hsdr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
