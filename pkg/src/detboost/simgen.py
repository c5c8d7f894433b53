"""Deterministic synthetic detection streams.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence(seed)``,
which is split into one child stream per drone/distractor track, one per
stationary distractor and one for clutter, in that order. The same spec and
seed always give the same output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Mapping, Sequence

import numpy as np

from .core import Box, Detection, GroundTruthBox, ImageDims, ValidationError

CONF_FLOOR, CONF_CEIL = 0.01, 0.99


@dataclass(frozen=True)
class TrackSpec:
    start_frame: int
    end_frame: int
    start_center: tuple[float, float]
    velocity: tuple[float, float]
    box_size: tuple[float, float] = (20.0, 20.0)
    conf_mean: float = 0.5
    conf_jitter: float = 0.05
    position_jitter: float = 0.5
    miss_prob: float = 0.0
    is_drone: bool = True
    cls_conf_mean: float = 0.5
    cls_conf_jitter: float = 0.05


@dataclass(frozen=True)
class StationaryDistractor:
    box: Box
    conf_mean: float
    conf_jitter: float = 0.05
    position_jitter: float = 0.5
    cls_conf_mean: float = 0.3


@dataclass(frozen=True)
class ScenarioSpec:
    dims: ImageDims
    n_frames: int
    drone_tracks: Sequence[TrackSpec] = ()
    clutter_rate: float = 0.0
    stationary_distractors: Sequence[StationaryDistractor] = ()
    seed: int = 0
    clutter_conf_mean: float = 0.6
    clutter_conf_jitter: float = 0.05
    clutter_cls_conf_mean: float = 0.3
    clutter_box_size: tuple[float, float] = (20.0, 20.0)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "stationary_distractors",
            tuple(s if isinstance(s, StationaryDistractor) else StationaryDistractor(*s) for s in self.stationary_distractors),
        )
        object.__setattr__(self, "drone_tracks", tuple(self.drone_tracks))

    def violations(self) -> list[str]:
        out = []
        if self.n_frames < 1:
            out.append(f"n_frames must be >= 1, got {self.n_frames}")
        if not 0 <= self.seed < 2**64:
            out.append(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not (math.isfinite(self.clutter_rate) and self.clutter_rate >= 0):
            out.append(f"clutter_rate must be >= 0, got {self.clutter_rate}")
        for name in ("clutter_conf_mean", "clutter_cls_conf_mean"):
            if not 0 < getattr(self, name) < 1:
                out.append(f"{name} must be in (0, 1)")
        if self.clutter_conf_jitter < 0:
            out.append("clutter_conf_jitter must be >= 0")
        if any(s <= 0 for s in self.clutter_box_size):
            out.append("clutter_box_size must be positive")
        for i, t in enumerate(self.drone_tracks):
            tag = f"drone_tracks[{i}]"
            if not 0 <= t.start_frame < t.end_frame <= self.n_frames:
                out.append(f"{tag}: need 0 <= start_frame < end_frame <= n_frames, got {t.start_frame}..{t.end_frame}")
            if not 0 <= t.miss_prob < 1:
                out.append(f"{tag}: miss_prob must be in [0, 1), got {t.miss_prob}")
            if not 0 < t.conf_mean < 1:
                out.append(f"{tag}: conf_mean must be in (0, 1), got {t.conf_mean}")
            if not 0 < t.cls_conf_mean < 1:
                out.append(f"{tag}: cls_conf_mean must be in (0, 1), got {t.cls_conf_mean}")
            if t.conf_jitter < 0 or t.cls_conf_jitter < 0 or t.position_jitter < 0:
                out.append(f"{tag}: jitters must be >= 0")
            if any(s <= 0 for s in t.box_size):
                out.append(f"{tag}: box_size must be positive")
        for i, s in enumerate(self.stationary_distractors):
            if not 0 < s.conf_mean < 1:
                out.append(f"stationary_distractors[{i}]: conf_mean must be in (0, 1), got {s.conf_mean}")
        return out


def _clip_conf(rng: np.random.Generator, mean: float, jitter: float) -> float:
    return float(np.clip(rng.normal(mean, jitter), CONF_FLOOR, CONF_CEIL))


def _clamped(cx: float, cy: float, w: float, h: float, dims: ImageDims) -> Box:
    w, h = min(w, dims.width), min(h, dims.height)
    x = min(max(cx - w / 2.0, 0.0), dims.width - w)
    y = min(max(cy - h / 2.0, 0.0), dims.height - h)
    return Box(float(x), float(y), float(w), float(h))


def generate_scenario(spec: ScenarioSpec) -> tuple[list[Detection], list[GroundTruthBox]]:
    """Detections and ground truth for ``spec``, both sorted by frame."""
    problems = spec.violations()
    if problems:
        raise ValidationError("; ".join(problems))

    children = np.random.SeedSequence(spec.seed).spawn(len(spec.drone_tracks) + len(spec.stationary_distractors) + 1)
    rngs = [np.random.Generator(np.random.PCG64(c)) for c in children]
    # (frame, emission order, item) so output is grouped by frame deterministically
    dets: list[tuple[int, int, Detection]] = []
    gts: list[tuple[int, int, GroundTruthBox]] = []
    order = 0

    for t, rng in zip(spec.drone_tracks, rngs):
        w, h = t.box_size
        for f in range(t.start_frame, t.end_frame):
            age = f - t.start_frame
            cx = t.start_center[0] + t.velocity[0] * age
            cy = t.start_center[1] + t.velocity[1] * age
            if t.is_drone:
                gts.append((f, order, GroundTruthBox(f, _clamped(cx, cy, w, h, spec.dims))))
            jx, jy = rng.uniform(-t.position_jitter, t.position_jitter, size=2)
            miss = rng.random() < t.miss_prob
            conf = _clip_conf(rng, t.conf_mean, t.conf_jitter)
            cls_conf = _clip_conf(rng, t.cls_conf_mean, t.cls_conf_jitter)
            if not miss:
                box = _clamped(cx + jx, cy + jy, w, h, spec.dims)
                dets.append((f, order, Detection(f, box, conf, cls_conf)))
            order += 1

    offset = len(spec.drone_tracks)
    for s, rng in zip(spec.stationary_distractors, rngs[offset:]):
        cx, cy = s.box.center
        for f in range(spec.n_frames):
            jx, jy = rng.uniform(-s.position_jitter, s.position_jitter, size=2)
            conf = _clip_conf(rng, s.conf_mean, s.conf_jitter)
            cls_conf = _clip_conf(rng, s.cls_conf_mean, s.conf_jitter)
            dets.append((f, order, Detection(f, _clamped(cx + jx, cy + jy, s.box.w, s.box.h, spec.dims), conf, cls_conf)))
            order += 1

    rng = rngs[-1]
    cw, ch = spec.clutter_box_size
    for f in range(spec.n_frames):
        for _ in range(int(rng.poisson(spec.clutter_rate))):
            cx = rng.uniform(0, spec.dims.width)
            cy = rng.uniform(0, spec.dims.height)
            conf = _clip_conf(rng, spec.clutter_conf_mean, spec.clutter_conf_jitter)
            cls_conf = _clip_conf(rng, spec.clutter_cls_conf_mean, spec.clutter_conf_jitter)
            dets.append((f, order, Detection(f, _clamped(cx, cy, cw, ch, spec.dims), conf, cls_conf)))
            order += 1

    dets.sort(key=lambda e: (e[0], e[1]))
    gts.sort(key=lambda e: (e[0], e[1]))
    return [d for _, _, d in dets], [g for _, _, g in gts]


def boost_wins_spec(seed: int = 8) -> ScenarioSpec:
    """A persistent weak drone track among confident one-off clutter and a parked distractor.

    Raw confidences rank the clutter and the distractor above the drone;
    track boosting should reverse most of that.
    """
    return ScenarioSpec(
        dims=ImageDims(640, 480),
        n_frames=60,
        drone_tracks=(
            TrackSpec(
                start_frame=0,
                end_frame=60,
                start_center=(100.0, 240.0),
                velocity=(5.0, 0.5),
                box_size=(24.0, 16.0),
                conf_mean=0.4,
                conf_jitter=0.05,
                position_jitter=0.5,
                cls_conf_mean=0.7,
            ),
        ),
        clutter_rate=0.5,
        stationary_distractors=(StationaryDistractor(Box(500.0, 60.0, 20.0, 20.0), 0.5),),
        seed=seed,
        clutter_conf_mean=0.6,
    )


def random_spec(seed: int) -> ScenarioSpec:
    """A randomly shaped but valid scenario, for soak and consistency testing."""
    rng = np.random.default_rng(seed)
    dims = ImageDims(640, 480)
    n_frames = int(rng.integers(20, 80))
    tracks = []
    for _ in range(int(rng.integers(1, 4))):
        start = int(rng.integers(0, n_frames - 5))
        end = int(rng.integers(start + 1, n_frames + 1))
        tracks.append(
            TrackSpec(
                start_frame=start,
                end_frame=end,
                start_center=(float(rng.uniform(50, 590)), float(rng.uniform(50, 430))),
                velocity=(float(rng.uniform(-4, 4)), float(rng.uniform(-4, 4))),
                box_size=(float(rng.uniform(12, 40)), float(rng.uniform(12, 40))),
                conf_mean=float(rng.uniform(0.2, 0.9)),
                conf_jitter=float(rng.uniform(0.0, 0.15)),
                position_jitter=float(rng.uniform(0.0, 2.0)),
                miss_prob=float(rng.uniform(0.0, 0.3)),
                is_drone=bool(rng.random() < 0.8),
                cls_conf_mean=float(rng.uniform(0.2, 0.9)),
            )
        )
    distractors = [
        StationaryDistractor(Box(float(rng.uniform(0, 600)), float(rng.uniform(0, 440)), 20.0, 20.0), float(rng.uniform(0.2, 0.8)))
        for _ in range(int(rng.integers(0, 3)))
    ]
    return ScenarioSpec(
        dims=dims,
        n_frames=n_frames,
        drone_tracks=tracks,
        clutter_rate=float(rng.uniform(0.0, 1.5)),
        stationary_distractors=distractors,
        seed=int(rng.integers(0, 2**63)),
    )


def spec_from_dict(raw: Mapping[str, Any]) -> ScenarioSpec:
    """Build a :class:`ScenarioSpec` from plain JSON-style data.

    Boxes are ``[x, y, w, h]`` lists; distractors may be ``[box, conf_mean]``
    pairs or objects with :class:`StationaryDistractor` field names.
    """
    known = {f.name for f in fields(ScenarioSpec)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        data = dict(raw)
        dims = data.pop("dims")
        data["dims"] = ImageDims(*dims) if isinstance(dims, (list, tuple)) else ImageDims(**dims)
        data["drone_tracks"] = tuple(
            TrackSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in t.items()})
            for t in data.get("drone_tracks", ())
        )
        distractors = []
        for s in data.get("stationary_distractors", ()):
            if isinstance(s, Mapping):
                s = dict(s)
                s["box"] = Box(*s["box"])
                distractors.append(StationaryDistractor(**s))
            else:
                box, conf = s
                distractors.append(StationaryDistractor(Box(*box), conf))
        data["stationary_distractors"] = tuple(distractors)
        if "clutter_box_size" in data:
            data["clutter_box_size"] = tuple(data["clutter_box_size"])
        return ScenarioSpec(**data)
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed scenario: {e}") from None
