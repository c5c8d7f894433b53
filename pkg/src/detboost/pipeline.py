"""End-to-end post-processing: fuse, track, boost, evaluate."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from itertools import groupby
from typing import Any, Mapping, Optional, Sequence

from .core import Detection, GroundTruthBox, OrderingError, ValidationError
from .evaluation import EvalConfig, map50
from .fusion import FusionConfig, fuse_detections
from .records import boosted_record, check_config_types, load_detections, load_ground_truth, write_atomic, write_jsonl
from .trackboost import BoostedDetection, StreamingBooster, TrackBoostConfig, boost_offline
from .tracker import Tracker, TrackerConfig

log = logging.getLogger(__name__)


class BoostMode(str, Enum):
    OFFLINE = "offline"
    STREAMING = "streaming"


class FusionSwitch(str, Enum):
    AUTO = "auto"
    ON = "on"
    OFF = "off"


_TUPLE_KEYS = {"process_noise", "measurement_noise", "w_high", "w_possible"}


def _section(cls, values: Mapping[str, Any]):
    kwargs = {}
    for f in fields(cls):
        if f.name in values:
            v = values[f.name]
            kwargs[f.name] = tuple(v) if f.name in _TUPLE_KEYS else v
    return cls(**kwargs)


@dataclass(frozen=True)
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    boost: TrackBoostConfig = field(default_factory=TrackBoostConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    mode: BoostMode = BoostMode.OFFLINE
    apply_fusion: FusionSwitch = FusionSwitch.AUTO

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BoostMode(self.mode))
        object.__setattr__(self, "apply_fusion", FusionSwitch(self.apply_fusion))

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        """Build from flat config keys (``t_conf``, ``iou_min``, ...)."""
        check_config_types(values)
        fusion_switch = values.get("apply_fusion", "auto")
        if isinstance(fusion_switch, bool):
            fusion_switch = "on" if fusion_switch else "off"
        try:
            return cls(
                tracker=_section(TrackerConfig, values),
                boost=_section(TrackBoostConfig, values),
                fusion=_section(FusionConfig, values),
                eval=_section(EvalConfig, values),
                mode=BoostMode(values.get("mode", "offline")),
                apply_fusion=FusionSwitch(fusion_switch),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(str(e)) from None


@dataclass
class PipelineResult:
    boosted: list[BoostedDetection]
    n_tracks: int
    category_counts: dict[str, int]
    fused: bool
    report: Optional[dict] = None


def _by_frame(dets: Sequence[Detection]):
    return [(f, list(g)) for f, g in groupby(dets, key=lambda d: d.frame)]


def _track(dets: Sequence[Detection], cfg: PipelineConfig) -> tuple[list[BoostedDetection], dict[tuple[int, int], int]]:
    """Boosted rows plus a map from (track id, position) to input index."""
    tracker = Tracker(cfg.tracker)
    booster = StreamingBooster(cfg.boost, cfg.tracker.speed_window) if cfg.mode is BoostMode.STREAMING else None
    source: dict[tuple[int, int], int] = {}
    out: list[BoostedDetection] = []
    start = 0
    for frame, group in _by_frame(dets):
        ids = tracker.step(frame, group)
        for j, tid in enumerate(ids):
            source[(tid, len(tracker.tracks[tid].detections) - 1)] = start + j
        if booster is not None:
            # Within a frame, emit in track-id order to match offline output order.
            for tid, d in sorted(zip(ids, group), key=lambda p: p[0]):
                out.append(booster.push(tid, d, tracker.tracks[tid].speeds[-1]))
        start += len(group)
    if booster is None:
        out = boost_offline(tracker.histories(), cfg.boost, cfg.tracker.speed_window)
    return out, source


def run_pipeline(
    detections: Sequence[Detection],
    cfg: PipelineConfig = PipelineConfig(),
    gts: Optional[Sequence[GroundTruthBox]] = None,
) -> PipelineResult:
    """Fuse (optional), track, boost and optionally score against ground truth.

    Detections must be in non-decreasing frame order. Output is sorted by
    frame, then track id. ``raw_conf`` on every output row is the input
    detector confidence, before fusion.
    """
    for i in range(1, len(detections)):
        if detections[i].frame < detections[i - 1].frame:
            raise OrderingError(f"detection {i} has frame {detections[i].frame} after frame {detections[i - 1].frame}")

    fuse = cfg.apply_fusion is FusionSwitch.ON or (
        cfg.apply_fusion is FusionSwitch.AUTO and any(d.cls_conf is not None for d in detections)
    )
    work = fuse_detections(detections) if fuse else list(detections)
    if fuse:
        log.info("fused classifier scores into %d detections", sum(d.cls_conf is not None for d in detections))

    boosted, source = _track(work, cfg)
    if fuse:
        boosted = [replace(b, raw_conf=detections[source[(b.track_id, b.position)]].conf) for b in boosted]

    # The category a track ends on; in offline mode every row of a track agrees.
    final = {b.track_id: b.category.value for b in boosted}
    counts = Counter(final.values())
    result = PipelineResult(
        boosted=boosted,
        n_tracks=len(final),
        category_counts={k: counts[k] for k in sorted(counts)},
        fused=fuse,
    )
    if gts is not None:
        result.report = evaluate_result(detections, work if fuse else None, result, gts, cfg.eval)
    return result


def evaluate_result(
    raw: Sequence[Detection],
    fused: Optional[Sequence[Detection]],
    result: PipelineResult,
    gts: Sequence[GroundTruthBox],
    cfg: EvalConfig,
) -> dict:
    if not gts:
        raise ValidationError("evaluation requested but the ground-truth set is empty")
    report: dict[str, Any] = {
        "map50_raw": map50(raw, gts, cfg),
        "map50_boosted": map50([b.detection for b in result.boosted], gts, cfg),
        "n_tracks": result.n_tracks,
        "category_counts": result.category_counts,
    }
    if fused is not None:
        report["map50_fused"] = map50(fused, gts, cfg)
    return report


def load_ordered(path, cfg: PipelineConfig) -> list[Detection]:
    """Read a detections file.

    Streaming mode rejects the first line whose frame goes backwards.
    Offline mode sorts by frame and keeps file order within a frame.
    """
    rows = load_detections(path)
    for (_, prev), (lineno, d) in zip(rows, rows[1:]):
        if d.frame < prev.frame:
            if cfg.mode is BoostMode.STREAMING:
                raise OrderingError(f"line {lineno}: frame {d.frame} comes after frame {prev.frame}")
            log.warning("%s: frames out of order (first at line %d); sorting", path, lineno)
            return [d for _, d in sorted(rows, key=lambda r: r[1].frame)]
    return [d for _, d in rows]


def run_pipeline_files(
    cfg: PipelineConfig,
    detections_path,
    output_path,
    gt_path=None,
    report_path=None,
) -> PipelineResult:
    """File-to-file pipeline. Outputs are written atomically."""
    dets = load_ordered(detections_path, cfg)
    gts = load_ground_truth(gt_path) if gt_path is not None else None
    if report_path is not None and gts is None:
        raise ValidationError("a metrics report was requested but no ground-truth file was given")
    result = run_pipeline(dets, cfg, gts)
    write_jsonl(output_path, (boosted_record(b) for b in result.boosted))
    if report_path is not None:
        write_atomic(report_path, json.dumps(result.report) + "\n")
    log.info(
        "%s: %d detections, %d tracks, categories %s",
        detections_path,
        len(result.boosted),
        result.n_tracks,
        result.category_counts,
    )
    return result
