"""Command-line entry point.

Subcommands: fuse, boost, eval, dataset, simulate, pipeline. Every error
exits nonzero and prints one JSON object ``{"error": <category>, "message": ...}``
on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .core import ImageDims, OrderingError, ValidationError
from .evaluation import map50
from .fusion import build_crop_manifest, fuse_detections, label_tp_fp
from .pipeline import FusionSwitch, PipelineConfig, run_pipeline_files
from .records import (
    ParseError,
    detection_record,
    ground_truth_record,
    load_config_records,
    load_detections,
    load_ground_truth,
    manifest_record,
    write_atomic,
    write_jsonl,
)
from .simgen import boost_wins_spec, generate_scenario, spec_from_dict

log = logging.getLogger("detboost")

EXIT_CODES = {"usage": 2, "parse": 3, "validation": 4, "ordering": 5, "io": 6}
SEED_ENV = "DROBOOST_SEED"
PRESETS = {"boost-wins": boost_wins_spec}

# (flag, config key, argparse kwargs)
_CONFIG_FLAGS = [
    ("--iou-min", "iou_min", dict(type=float)),
    ("--max-missed", "max_missed", dict(type=int)),
    ("--process-noise", "process_noise", dict(type=float, nargs=8)),
    ("--measurement-noise", "measurement_noise", dict(type=float, nargs=4)),
    ("--initial-covariance", "initial_covariance", dict(type=float)),
    ("--speed-window", "speed_window", dict(type=int)),
    ("--t-conf", "t_conf", dict(type=float)),
    ("--score-high", "score_high", dict(type=float)),
    ("--score-low", "score_low", dict(type=float)),
    ("--velocity-threshold", "velocity_threshold", dict(type=float)),
    ("--w-high", "w_high", dict(type=float, nargs=2)),
    ("--w-possible", "w_possible", dict(type=float, nargs=2)),
    ("--stationary-penalty", "stationary_penalty", dict(type=float)),
    ("--score-mode", "score_mode", dict(choices=["semantic", "literal"])),
    ("--match-iou", "match_iou", dict(type=float)),
    ("--crop-margin", "crop_margin", dict(type=float)),
    ("--iou-threshold", "iou_threshold", dict(type=float)),
    ("--interpolation", "interpolation", dict(choices=["all_point", "eleven_point"])),
    ("--mode", "mode", dict(choices=["offline", "streaming"])),
    ("--fusion", "apply_fusion", dict(choices=[s.value for s in FusionSwitch])),
]


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="config file of JSON records with the keys below")
    for flag, key, kwargs in _CONFIG_FLAGS:
        g.add_argument(flag, dest=key, default=None, **kwargs)
    return p


def _log_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    v = p.add_mutually_exclusive_group()
    v.add_argument("-q", "--quiet", action="store_true")
    v.add_argument("-v", "--verbose", action="store_true")
    return p


def build_config(args: argparse.Namespace, **forced) -> PipelineConfig:
    values = load_config_records(args.config) if getattr(args, "config", None) else {}
    for _, key, _ in _CONFIG_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values.update(forced)
    return PipelineConfig.from_mapping(values)


def cmd_fuse(args: argparse.Namespace) -> int:
    dets = [d for _, d in load_detections(args.detections)]
    write_jsonl(args.output, (detection_record(d) for d in fuse_detections(dets)))
    return 0


def cmd_boost(args: argparse.Namespace) -> int:
    cfg = build_config(args, apply_fusion="off")
    run_pipeline_files(cfg, args.detections, args.output)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    dets = [d for _, d in load_detections(args.detections)]
    report = {"map50": map50(dets, load_ground_truth(args.gt), cfg.eval), "n_predictions": len(dets)}
    text = json.dumps(report) + "\n"
    if args.output:
        write_atomic(args.output, text)
    sys.stdout.write(text)
    return 0


def cmd_dataset(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    dets = [d for _, d in load_detections(args.detections)]
    labels = label_tp_fp(dets, load_ground_truth(args.gt), cfg.fusion.match_iou)
    entries = build_crop_manifest(dets, labels, ImageDims(args.width, args.height), cfg.fusion)
    write_jsonl(args.output, (manifest_record(e) for e in entries))
    log.info("manifest: %d drone, %d not_drone", sum(labels), len(labels) - sum(labels))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid scenario JSON ({e.msg})", e.lineno) from None
        spec = spec_from_dict(raw)
    else:
        spec = PRESETS[args.preset]()
    seed = args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if seed is not None:
        spec = replace(spec, seed=seed)
    dets, gts = generate_scenario(spec)
    write_jsonl(args.out_detections, (detection_record(d) for d in dets))
    write_jsonl(args.out_gt, (ground_truth_record(g) for g in gts))
    log.info("simulated %d detections, %d ground-truth boxes (seed %d)", len(dets), len(gts), spec.seed)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    inputs: list[Path] = args.detections
    if args.gt and len(args.gt) != len(inputs):
        raise ValidationError(f"got {len(inputs)} detection files but {len(args.gt)} ground-truth files")
    if args.report and not args.gt:
        raise ValidationError("--report needs --gt")
    gts = args.gt or [None] * len(inputs)

    if len(inputs) == 1:
        jobs = [(inputs[0], gts[0], args.output, args.report)]
    else:
        out_dir = args.output
        jobs = [
            (src, gt, out_dir / f"{src.stem}.boosted.jsonl", (out_dir / f"{src.stem}.report.json") if gt else None)
            for src, gt in zip(inputs, gts)
        ]

    def run(job):
        src, gt, out, report = job
        return run_pipeline_files(cfg, src, out, gt, report)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, jobs))
    for (src, gt, _, _), result in zip(jobs, results):
        if result.report is not None:
            sys.stdout.write(json.dumps({"input": str(src), **result.report}) + "\n")
    return 0


def make_parser() -> argparse.ArgumentParser:
    cfg, logp = _config_parent(), _log_parent()
    parser = argparse.ArgumentParser(prog="detboost", description="Track-aware confidence boosting for video detections.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", parents=[logp], help="fuse detector and classifier confidences")
    p.add_argument("detections", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("boost", parents=[cfg, logp], help="track and boost detections (no fusion)")
    p.add_argument("detections", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("eval", parents=[cfg, logp], help="mAP of detections against ground truth")
    p.add_argument("detections", type=Path)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dataset", parents=[cfg, logp], help="TP/FP crop manifest for classifier training")
    p.add_argument("detections", type=Path)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("simulate", parents=[logp], help="generate a synthetic detection stream")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS), default="boost-wins")
    src.add_argument("--spec", type=Path, help="scenario JSON file")
    p.add_argument("--seed", type=int, help=f"overrides the scenario seed; {SEED_ENV} overrides this")
    p.add_argument("--out-detections", type=Path, required=True)
    p.add_argument("--out-gt", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", parents=[cfg, logp], help="fuse, track, boost and evaluate")
    p.add_argument("detections", type=Path, nargs="+")
    p.add_argument("--gt", type=Path, action="append", help="ground truth, once per detections file")
    p.add_argument("-o", "--output", type=Path, required=True, help="output file, or directory for several inputs")
    p.add_argument("--report", type=Path, help="metrics report path (single input)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _fail(category: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return EXIT_CODES[category]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except ParseError as e:
        return _fail("parse", str(e))
    except OrderingError as e:
        return _fail("ordering", str(e))
    except ValidationError as e:
        return _fail("validation", str(e))
    except OSError as e:
        return _fail("io", str(e))


if __name__ == "__main__":
    sys.exit(main())
