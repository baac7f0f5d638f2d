"""Command line entry points: svtas train | eval | stream | bench.

Configuration comes from an optional JSON file plus flag overrides (flags
win). Exit codes: 0 on success, 2 on configuration errors, 3 on data
errors. Every output file carries the model config hash so runs can be
traced back to their exact configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import (VARIANTS, RunConfig, SyntheticSpec, config_hash)
from .datasets import (load_dataset, make_synthetic_dataset, synthetic_stream,
                       write_label_file)
from .errors import ConfigError, DataError, SvtasError
from .evaluate import evaluate_model
from .streaming import (StreamSession, chunk_stream, frame_dir_iterator,
                        measure_step_cost, segment_stream)
from .train import train_model


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON run config")
    parser.add_argument("--variant", choices=VARIANTS)
    parser.add_argument("--k", type=int, help="chunk length in model-rate frames")
    parser.add_argument("--sample-rate", type=int, help="temporal subsampling stride")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svtas",
        description="streaming temporal action segmentation: train, "
                    "evaluate, stream, benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a variant and write a checkpoint")
    _add_common(p_train)
    p_train.add_argument("--synthetic", metavar="SPEC",
                         help="'default' or a JSON file of synthetic dataset fields")
    p_train.add_argument("--data", metavar="DIR", help="saved dataset directory")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--early-stop-acc", type=float)

    p_eval = sub.add_parser("eval", help="stream a dataset through a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--synthetic", metavar="SPEC")
    p_eval.add_argument("--data", metavar="DIR")

    p_stream = sub.add_parser("stream", help="segment one stream of frames")
    _add_common(p_stream)
    p_stream.add_argument("--checkpoint", required=True)
    p_stream.add_argument("--frames", metavar="DIR",
                          help="directory of frame_%%06d.png files")
    p_stream.add_argument("--synthetic-frames", type=int, metavar="N",
                          help="stream N synthetic frames instead of --frames")
    p_stream.add_argument("--synthetic", metavar="SPEC")
    p_stream.add_argument("--video-index", type=int, default=0)

    p_bench = sub.add_parser("bench", help="latency and cache-size report")
    _add_common(p_bench)
    p_bench.add_argument("--checkpoint", required=True)
    p_bench.add_argument("--lengths", type=int, nargs="+", default=[100, 10000],
                         metavar="N", help="stream lengths in frames")
    return parser


def _load_synthetic_spec(value: str) -> SyntheticSpec:
    if value == "default":
        return SyntheticSpec().validate()
    try:
        with open(value) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read synthetic spec {value}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"synthetic spec {value} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"synthetic spec {value} must contain a JSON object")
    return SyntheticSpec.from_dict(raw)


def _out_dir(args, default: str) -> str:
    path = args.out if args.out else default
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_model(args):
    """Rebuild a checkpointed model, applying runtime geometry overrides."""
    model, manifest = load_checkpoint(args.checkpoint)
    if args.variant is not None and args.variant != manifest["variant"]:
        raise ConfigError(
            f"checkpoint holds a {manifest['variant']} model, "
            f"--variant {args.variant} does not match")
    changes = {}
    if args.k is not None:
        changes["k"] = args.k
    if args.sample_rate is not None:
        changes["sample_rate"] = args.sample_rate
    if changes:
        model.config = dataclasses.replace(model.config, **changes).validate()
    return model, manifest


def _load_index(args):
    if args.data is not None:
        return load_dataset(args.data)
    spec = _load_synthetic_spec(args.synthetic or "default")
    return make_synthetic_dataset(spec)


def cmd_train(args) -> int:
    run = RunConfig.from_json(args.config) if args.config else RunConfig()
    run.apply_overrides(variant=args.variant, k=args.k,
                        sample_rate=args.sample_rate, seed=args.seed,
                        out=args.out)
    if args.epochs is not None:
        run.epochs = args.epochs
    if args.batch_size is not None:
        run.batch_size = args.batch_size
    if args.early_stop_acc is not None:
        run.early_stop_acc = args.early_stop_acc
    if args.data is not None:
        run.data_dir = args.data
    if args.synthetic is not None:
        run.synthetic = _load_synthetic_spec(args.synthetic)
        run.data_dir = None
    run.validate()

    index = (load_dataset(run.data_dir) if run.data_dir is not None
             else make_synthetic_dataset(run.synthetic))
    os.makedirs(run.out_dir, exist_ok=True)
    _write_json(os.path.join(run.out_dir, "config.json"),
                dict(run.to_dict(), config_hash=config_hash(run.model)))
    model, history = train_model(
        run, index, log_path=os.path.join(run.out_dir, "train_log.jsonl"))
    ckpt = os.path.join(run.out_dir, "checkpoint.ckpt")
    save_checkpoint(ckpt, model, run.variant)
    final = history[-1]
    print(f"trained {run.variant}: epochs={final['epochs_run']} "
          f"loss={final['loss']:.4f} acc={final['acc']:.4f} -> {ckpt}")
    return 0


def cmd_eval(args) -> int:
    model, manifest = _load_model(args)
    index = _load_index(args)
    if list(index.class_names) != list(model.class_names):
        raise ConfigError(
            f"dataset classes {index.class_names} do not match checkpoint "
            f"classes {model.class_names}")
    report, predictions = evaluate_model(model, index)
    out = _out_dir(args, "eval_out")
    pred_dir = os.path.join(out, "predictions")
    os.makedirs(pred_dir, exist_ok=True)
    for vid, labels in predictions.items():
        write_label_file(os.path.join(pred_dir, f"{vid}.txt"), labels,
                         model.class_names)
    payload = {
        "config_hash": config_hash(model.config),
        "variant": manifest["variant"],
        "checkpoint": os.path.abspath(args.checkpoint),
        "report": report,
    }
    _write_json(os.path.join(out, "metrics.json"), payload)
    f1 = " ".join(f"f1@{thr}={v:.4f}" for thr, v in report["f1"].items())
    print(f"eval {manifest['variant']}: acc={report['acc']:.4f} {f1} "
          f"map50={report['map50']:.4f} auc={report['auc']:.4f}")
    print(f"wrote {os.path.join(out, 'metrics.json')}")
    return 0


def cmd_stream(args) -> int:
    if (args.frames is None) == (args.synthetic_frames is None):
        raise ConfigError("need exactly one of --frames or --synthetic-frames")
    model, manifest = _load_model(args)
    if args.frames is not None:
        frames = frame_dir_iterator(args.frames)
        source = os.path.abspath(args.frames)
    else:
        spec = _load_synthetic_spec(args.synthetic or "default")
        if (spec.height, spec.width) != (model.config.height, model.config.width):
            raise ConfigError(
                f"synthetic frames are {spec.height}x{spec.width}, model "
                f"expects {model.config.height}x{model.config.width}")
        frames, _ = synthetic_stream(spec, args.synthetic_frames,
                                     video_index=args.video_index)
        source = f"synthetic:{args.synthetic_frames}"
    labels = segment_stream(model, frames, model.config.sample_rate)
    out = _out_dir(args, "stream_out")
    label_path = os.path.join(out, "stream_labels.txt")
    write_label_file(label_path, labels, model.class_names)
    _write_json(os.path.join(out, "stream_meta.json"), {
        "config_hash": config_hash(model.config),
        "variant": manifest["variant"],
        "source": source,
        "num_frames": int(labels.shape[0]),
        "k": model.config.k,
        "sample_rate": model.config.sample_rate,
    })
    print(f"streamed {labels.shape[0]} frames -> {label_path}")
    return 0


def cmd_bench(args) -> int:
    model, manifest = _load_model(args)
    cfg = model.config
    rate = cfg.sample_rate
    rows = []
    for length in args.lengths:
        if length < 1:
            raise ConfigError(f"stream length must be >= 1, got {length}")
        default = SyntheticSpec()
        spec = SyntheticSpec(num_videos=1, num_frames=length, height=cfg.height,
                             width=cfg.width, num_classes=cfg.num_classes,
                             min_segment=min(default.min_segment, length),
                             max_segment=min(default.max_segment, length)).validate()
        frames, _ = synthetic_stream(spec, length)
        model_rate = (f for i, f in enumerate(frames) if i % rate == 0)
        session = StreamSession(model)
        times = []
        sizes = set()
        for chunk in chunk_stream(model_rate, cfg.k):
            seconds, cache_bytes = measure_step_cost(session, chunk)
            times.append(seconds)
            sizes.add(cache_bytes)
        if len(sizes) != 1:
            raise SvtasError(f"cache bytes varied across steps: {sorted(sizes)}")
        rows.append({
            "num_frames": length,
            "num_chunks": len(times),
            "median_seconds": float(np.median(times)),
            "p95_seconds": float(np.percentile(times, 95)),
            "cache_bytes": sizes.pop(),
        })
    if len({row["cache_bytes"] for row in rows}) != 1:
        raise SvtasError("cache bytes varied across stream lengths")
    out = _out_dir(args, "bench_out")
    payload = {
        "config_hash": config_hash(cfg),
        "variant": manifest["variant"],
        "k": cfg.k,
        "sample_rate": cfg.sample_rate,
        "cache_bytes_constant": True,
        "lengths": rows,
    }
    _write_json(os.path.join(out, "bench.json"), payload)
    for row in rows:
        print(f"frames={row['num_frames']:>7} chunks={row['num_chunks']:>5} "
              f"median={row['median_seconds'] * 1e3:8.2f}ms "
              f"p95={row['p95_seconds'] * 1e3:8.2f}ms "
              f"cache={row['cache_bytes']}B")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "stream": cmd_stream,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
