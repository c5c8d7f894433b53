"""Line-oriented JSON record formats (one object per line, UTF-8).

detections    {"frame": int, "bbox": [x, y, w, h], "conf": float, "cls_conf": float?}
ground truth  {"frame": int, "bbox": [x, y, w, h]}
boosted       detection fields + "track_id", "category", "raw_conf"
crop manifest {"frame": int, "crop": [x, y, w, h], "label": "drone"|"not_drone", "source_conf": float}
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Union

from .core import Box, Detection, GroundTruthBox, ValidationError
from .fusion import CropManifestEntry
from .trackboost import BoostedDetection

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

DETECTION_FIELDS = frozenset({"frame", "bbox", "conf", "cls_conf"})
GT_FIELDS = frozenset({"frame", "bbox"})
BOOSTED_FIELDS = DETECTION_FIELDS | {"track_id", "category", "raw_conf"}


class ParseError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None, field: Optional[str] = None) -> None:
        self.lineno = lineno
        self.field = field
        where = f"line {lineno}: " if lineno is not None else ""
        what = f'field "{field}": ' if field else ""
        super().__init__(f"{where}{what}{message}")


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _frame(rec: dict, lineno: int) -> int:
    if "frame" not in rec:
        raise ParseError("missing", lineno, "frame")
    f = rec["frame"]
    if isinstance(f, bool) or not isinstance(f, int) or f < 0:
        raise ParseError(f"expected a non-negative integer, got {f!r}", lineno, "frame")
    return f


def _box(rec: dict, key: str, lineno: int) -> Box:
    if key not in rec:
        raise ParseError("missing", lineno, key)
    v = rec[key]
    if not isinstance(v, list) or len(v) != 4 or not all(_is_number(x) for x in v):
        raise ParseError(f"expected [x, y, w, h] of finite numbers, got {v!r}", lineno, key)
    if v[2] < 0 or v[3] < 0:
        raise ParseError(f"width and height must be non-negative, got {v!r}", lineno, key)
    return Box(*(float(x) for x in v))


def _unit(rec: dict, key: str, lineno: int, required: bool = True) -> Optional[float]:
    if key not in rec or (not required and rec[key] is None):
        if required:
            raise ParseError("missing", lineno, key)
        return None
    v = rec[key]
    if not _is_number(v):
        raise ParseError(f"expected a finite number, got {v!r}", lineno, key)
    if not 0.0 <= v <= 1.0:
        raise ParseError(f"out of range [0, 1]: {v!r}", lineno, key)
    return float(v)


def _records(lines: Iterable[str], known: frozenset) -> Iterator[tuple[int, dict]]:
    warned: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON ({e.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("expected a JSON object", lineno)
        for k in rec.keys() - known - warned:
            log.warning("line %d: ignoring unknown field %r", lineno, k)
            warned.add(k)
        yield lineno, rec


def parse_detections(lines: Iterable[str]) -> list[tuple[int, Detection]]:
    """``(line number, detection)`` pairs."""
    out = []
    for lineno, rec in _records(lines, DETECTION_FIELDS):
        out.append(
            (
                lineno,
                Detection(
                    frame=_frame(rec, lineno),
                    box=_box(rec, "bbox", lineno),
                    conf=_unit(rec, "conf", lineno),
                    cls_conf=_unit(rec, "cls_conf", lineno, required=False),
                ),
            )
        )
    return out


def parse_ground_truth(lines: Iterable[str]) -> list[GroundTruthBox]:
    return [GroundTruthBox(_frame(rec, n), _box(rec, "bbox", n)) for n, rec in _records(lines, GT_FIELDS)]


def parse_boosted(lines: Iterable[str]) -> list[dict]:
    out = []
    for n, rec in _records(lines, BOOSTED_FIELDS):
        det = Detection(_frame(rec, n), _box(rec, "bbox", n), _unit(rec, "conf", n), _unit(rec, "cls_conf", n, False))
        raw = _unit(rec, "raw_conf", n)
        tid = rec.get("track_id")
        if isinstance(tid, bool) or not isinstance(tid, int) or tid < 0:
            raise ParseError(f"expected a non-negative integer, got {tid!r}", n, "track_id")
        if not isinstance(rec.get("category"), str):
            raise ParseError("expected a string", n, "category")
        out.append({"detection": det, "raw_conf": raw, "track_id": tid, "category": rec["category"]})
    return out


def detection_record(d: Detection) -> dict:
    rec: dict[str, Any] = {"frame": d.frame, "bbox": d.box.as_list(), "conf": d.conf}
    if d.cls_conf is not None:
        rec["cls_conf"] = d.cls_conf
    return rec


def ground_truth_record(g: GroundTruthBox) -> dict:
    return {"frame": g.frame, "bbox": g.box.as_list()}


def boosted_record(b: BoostedDetection) -> dict:
    rec = detection_record(b.detection)
    rec.update(track_id=b.track_id, category=b.category.value, raw_conf=b.raw_conf)
    return rec


def manifest_record(e: CropManifestEntry) -> dict:
    return {"frame": e.frame, "crop": e.crop.as_list(), "label": e.label.value, "source_conf": e.source_conf}


def dumps(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, separators=(", ", ": "), allow_nan=False) + "\n" for r in records)


def write_atomic(path: PathLike, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_jsonl(path: PathLike, records: Iterable[dict]) -> None:
    write_atomic(path, dumps(records))


def read_lines(path: PathLike) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_detections(path: PathLike) -> list[tuple[int, Detection]]:
    return parse_detections(read_lines(path))


def load_ground_truth(path: PathLike) -> list[GroundTruthBox]:
    return parse_ground_truth(read_lines(path))


def load_config_records(path: PathLike) -> dict:
    """Merge every object in a config file; nested sections are flattened."""
    merged: dict = {}
    for lineno, rec in _records(read_lines(path), frozenset(_ALL_CONFIG_KEYS) | set(_SECTIONS)):
        for k, v in rec.items():
            if k in _SECTIONS and isinstance(v, dict):
                for kk, vv in v.items():
                    if kk not in _ALL_CONFIG_KEYS:
                        log.warning("line %d: ignoring unknown config key %s.%s", lineno, k, kk)
                        continue
                    merged[kk] = vv
            elif k in _ALL_CONFIG_KEYS:
                merged[k] = v
    return merged


_SECTIONS = ("tracker", "boost", "fusion", "eval")
_ALL_CONFIG_KEYS = (
    "iou_min max_missed process_noise measurement_noise initial_covariance speed_window "
    "t_conf score_high score_low velocity_threshold w_high w_possible stationary_penalty score_mode "
    "match_iou crop_margin iou_threshold interpolation mode apply_fusion"
).split()


def check_config_types(values: dict) -> None:
    for k, v in values.items():
        if k in ("score_mode", "interpolation", "mode", "apply_fusion"):
            if not isinstance(v, (str, bool)):
                raise ValidationError(f"config {k}: expected a string, got {v!r}")
        elif k in ("process_noise", "measurement_noise", "w_high", "w_possible"):
            if not isinstance(v, (list, tuple)) or not all(_is_number(x) for x in v):
                raise ValidationError(f"config {k}: expected a list of numbers, got {v!r}")
        elif not _is_number(v):
            raise ValidationError(f"config {k}: expected a number, got {v!r}")
