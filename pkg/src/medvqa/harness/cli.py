"""Command-line entry points: training, evaluation, ablation, error-report
aggregation, the inference service and synthetic-data generation."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import error_report, pipeline
from .config import MODE_WITH_QS, MODE_WITHOUT_QS, RunConfig


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "mode", None) is not None:
        config.mode = args.mode
    return config


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True), encoding="utf-8")


def cmd_train_qs(args) -> int:
    config = _load_config(args)
    out = _prepare_out(args.out)
    model, report = pipeline.run_qs_experiment(config, args.dataset)
    model.save(out / "qs_model.json")
    _write_json(out / "qs_report.json", report)
    config.save(out / "config.json")
    print(json.dumps(report["overall"], indent=1))
    return 0


def cmd_train_vqa(args) -> int:
    config = _load_config(args)
    out = _prepare_out(args.out)
    train_set = pipeline.load_split(config, args.dataset, "train")
    features, tag = pipeline.extract_features_for(config, [train_set])
    result = pipeline.train_system(config, train_set, features, tag)
    result.system.save(out)
    _write_json(out / "training_log.json", result.log_dict())
    print(f"checkpoint written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    if args.predictions and args.references:
        report = pipeline.evaluate_files(args.predictions, args.references)
    else:
        if not (args.checkpoint and args.dataset):
            raise ValueError("evaluate needs --predictions/--references or --checkpoint/--dataset")
        system = pipeline.VqaSystem.load(args.checkpoint)
        test_set = pipeline.load_split(config, args.dataset, args.split)
        features, _ = pipeline.extract_features_for(config, [test_set])
        report = pipeline.evaluate_split(system, test_set, features)
    if args.out:
        _write_json(args.out, report)
    print(json.dumps(report.get("overall"), indent=1))
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args)
    system = pipeline.VqaSystem.load(args.checkpoint)
    dataset = pipeline.load_split(config, args.dataset, args.split)
    features, _ = pipeline.extract_features_for(config, [dataset])
    predictions = system.predict_dataset(dataset, features)
    pipeline.write_predictions(args.out, dataset, predictions)
    if args.references_out:
        pipeline.write_references(args.references_out, dataset)
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args)
    out = _prepare_out(args.out)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    results = pipeline.run_ablation(config, args.dataset, seeds=seeds)
    _write_json(out / "ablation.json", results)
    config.save(out / "config.json")
    means = results["mean_overall_bleu"]
    print(f"overall BLEU  with routing: {means[MODE_WITH_QS]:.4f}")
    print(f"overall BLEU  without:      {means[MODE_WITHOUT_QS]:.4f}")
    print(f"delta:                      {results['delta_bleu']:+.4f}")
    return 0


def cmd_error_report(args) -> int:
    records = error_report.load_annotations(args.annotations)
    summary = error_report.aggregate(records)
    if args.out:
        _write_json(args.out, summary)
    for category in error_report.CATEGORIES:
        print(f"{category:16s} {summary['percentages'][category]:6.2f}%")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.checkpoint, host=args.host, port=args.port, cache_dir=args.cache_dir)
    return 0


def cmd_synth_data(args) -> int:
    from .. import synthetic

    out = _prepare_out(args.out)
    scale = args.scale
    rad = synthetic.make_rad(
        out / "rad",
        n_train=max(8, int(3064 * scale)),
        n_test=max(8, int(451 * scale)),
        n_images=max(4, int(315 * scale)),
        seed=args.seed,
    )
    clef = synthetic.make_clef(
        out / "clef18",
        n_train=max(8, int(5413 * scale)),
        n_val=max(4, int(500 * scale)),
        n_test=max(8, int(500 * scale)),
        n_images=max(4, int(400 * scale)),
        seed=args.seed + 1,
    )
    words = synthetic.corpus_words(rad["train"], rad["test"], clef["train"], clef["val"], clef["test"])
    synthetic.write_glove(out / "glove.txt", words, dim=args.glove_dim, seed=args.seed)
    print(f"synthetic workspace written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medvqa")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="path to a RunConfig JSON file")
        p.add_argument("--seed", type=int, help="override the config seed")
        if out_required:
            p.add_argument("--out", required=True)

    p = sub.add_parser("train-qs", help="train and score the question-type classifier")
    common(p)
    p.add_argument("--dataset", default="rad", choices=["rad", "clef18", "combined"])
    p.set_defaults(func=cmd_train_qs)

    p = sub.add_parser("train-vqa", help="train the answer models and write a checkpoint")
    common(p)
    p.add_argument("--dataset", default="rad", choices=["rad", "clef18", "combined"])
    p.add_argument("--mode", choices=[MODE_WITH_QS, MODE_WITHOUT_QS])
    p.set_defaults(func=cmd_train_vqa)

    p = sub.add_parser("evaluate", help="score predictions against references")
    common(p, out_required=False)
    p.add_argument("--out")
    p.add_argument("--checkpoint")
    p.add_argument("--dataset", choices=["rad", "clef18", "combined"])
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--predictions")
    p.add_argument("--references")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="write a predictions JSONL for a dataset split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, choices=["rad", "clef18", "combined"])
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--references-out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="paired runs with and without question routing")
    common(p)
    p.add_argument("--dataset", default="rad", choices=["rad", "clef18", "combined"])
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("error-report", help="aggregate an annotated error file")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_error_report)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth-data", help="generate a synthetic stand-in workspace")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--glove-dim", type=int, default=300)
    p.set_defaults(func=cmd_synth_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    created_out = None
    out = getattr(args, "out", None)
    if out and args.command != "evaluate":
        out_path = Path(out)
        if not out_path.exists():
            created_out = out_path
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single structured exit point
        if created_out is not None and created_out.is_dir():
            shutil.rmtree(created_out, ignore_errors=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
