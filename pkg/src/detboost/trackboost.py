"""Track scoring, certainty categories and confidence adjustment.

A track's score accumulates ``conf - t_conf`` per detection (``semantic``
mode) or the opposite sign (``literal`` mode). The score and the track's
median smoothed speed pick one of four categories, and each category has
its own rule for rewriting the confidences of the track's detections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

from .core import Detection, OrderingError, ValidationError
from .tracker import TrackHistory, median_speed


class TrackCategory(str, Enum):
    HIGHLY_LIKELY = "HighlyLikely"
    UNLIKELY = "Unlikely"
    STATIONARY = "Stationary"
    POSSIBLE = "Possible"


class ScoreMode(str, Enum):
    SEMANTIC = "semantic"
    LITERAL = "literal"


@dataclass(frozen=True)
class TrackBoostConfig:
    t_conf: float = 0.3
    score_high: float = 25.0
    score_low: float = 5.0
    velocity_threshold: float = 0.3
    w_high: tuple[float, float] = (0.3, 0.7)
    w_possible: tuple[float, float] = (0.5, 0.5)
    stationary_penalty: float = 0.3
    score_mode: ScoreMode = ScoreMode.SEMANTIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "score_mode", ScoreMode(self.score_mode))
        object.__setattr__(self, "w_high", tuple(self.w_high))
        object.__setattr__(self, "w_possible", tuple(self.w_possible))
        problems = []
        if not 0.0 < self.t_conf < 1.0:
            problems.append(f"t_conf must be in (0, 1), got {self.t_conf}")
        if not self.score_low < self.score_high:
            problems.append(f"score_low ({self.score_low}) must be below score_high ({self.score_high})")
        if not (math.isfinite(self.velocity_threshold) and self.velocity_threshold >= 0):
            problems.append(f"velocity_threshold must be non-negative, got {self.velocity_threshold}")
        for name in ("w_high", "w_possible"):
            w = getattr(self, name)
            if len(w) != 2 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                problems.append(f"{name} must be two non-negative weights summing to 1, got {w}")
        if not 0.0 < self.stationary_penalty <= 1.0:
            problems.append(f"stationary_penalty must be in (0, 1], got {self.stationary_penalty}")
        if problems:
            raise ValidationError("; ".join(problems))


def score_step(prev: float, conf: float, cfg: TrackBoostConfig = TrackBoostConfig()) -> float:
    if not math.isfinite(conf):
        raise ValidationError(f"conf must be finite, got {conf!r}")
    if cfg.score_mode is ScoreMode.LITERAL:
        return prev + (cfg.t_conf - conf)
    return prev + (conf - cfg.t_conf)


def track_score(confs: Iterable[float], cfg: TrackBoostConfig = TrackBoostConfig()) -> float:
    # Same left fold as repeated score_step calls, inlined for long tracks.
    t = cfg.t_conf
    literal = cfg.score_mode is ScoreMode.LITERAL
    score = 0.0
    for c in confs:
        if not math.isfinite(c):
            raise ValidationError(f"conf must be finite, got {c!r}")
        score += (t - c) if literal else (c - t)
    return score


def categorize(score: float, speed: float, cfg: TrackBoostConfig = TrackBoostConfig()) -> TrackCategory:
    # Rule order matters: a high score wins over everything, a negative one next.
    if score > cfg.score_high:
        return TrackCategory.HIGHLY_LIKELY
    if score < 0.0:
        return TrackCategory.UNLIKELY
    if score < cfg.score_low and speed < cfg.velocity_threshold:
        return TrackCategory.STATIONARY
    return TrackCategory.POSSIBLE


def adjust_confidence(
    conf: float, max_conf: float, category: TrackCategory, cfg: TrackBoostConfig = TrackBoostConfig()
) -> float:
    if category is TrackCategory.HIGHLY_LIKELY:
        a, b = cfg.w_high
        out = a * conf + b * max_conf
    elif category is TrackCategory.POSSIBLE:
        a, b = cfg.w_possible
        out = a * conf + b * max_conf
    elif category is TrackCategory.STATIONARY:
        out = cfg.stationary_penalty * conf
    else:
        out = conf
    return min(max(out, 0.0), 1.0)


@dataclass(frozen=True)
class BoostedDetection:
    """A detection whose ``conf`` was rewritten by track boosting."""

    detection: Detection
    raw_conf: float
    track_id: int
    position: int
    category: TrackCategory
    score: float


def boost_track(track: TrackHistory, cfg: TrackBoostConfig = TrackBoostConfig(), window: int = 9) -> list[BoostedDetection]:
    if not track.detections:
        return []
    score = track_score(track.confidences, cfg)
    category = categorize(score, median_speed(track.speeds, window), cfg)
    top = max(track.confidences)
    return [
        BoostedDetection(
            detection=replace(d, conf=adjust_confidence(c, top, category, cfg)),
            raw_conf=c,
            track_id=track.track_id,
            position=j,
            category=category,
            score=score,
        )
        for j, (d, c) in enumerate(zip(track.detections, track.confidences))
    ]


def boost_offline(
    tracks: Sequence[TrackHistory], cfg: TrackBoostConfig = TrackBoostConfig(), window: int = 9
) -> list[BoostedDetection]:
    """Categorize each whole track once and adjust all of its detections.

    Output is ordered by frame, then track id.
    """
    out = [b for t in tracks for b in boost_track(t, cfg, window)]
    out.sort(key=lambda b: (b.detection.frame, b.track_id))
    return out


@dataclass
class _Prefix:
    score: float = 0.0
    top: float = 0.0
    speeds: list[float] = field(default_factory=list)
    last_frame: int = -1


class StreamingBooster:
    """Causal boosting: each detection sees only its track's prefix."""

    def __init__(self, cfg: Optional[TrackBoostConfig] = None, window: int = 9) -> None:
        self.cfg = cfg or TrackBoostConfig()
        self.window = window
        self._tracks: dict[int, _Prefix] = {}
        self._frame: Optional[int] = None

    def push(self, track_id: int, d: Detection, speed: float) -> BoostedDetection:
        if self._frame is not None and d.frame < self._frame:
            raise OrderingError(f"frame {d.frame} arrived after frame {self._frame}")
        self._frame = d.frame
        p = self._tracks.setdefault(track_id, _Prefix())
        if p.speeds and d.frame <= p.last_frame:
            raise OrderingError(f"track {track_id}: frame {d.frame} is not after {p.last_frame}")
        p.last_frame = d.frame
        p.score = score_step(p.score, d.conf, self.cfg)
        p.top = max(p.top, d.conf) if p.speeds else d.conf
        p.speeds.append(speed)
        category = categorize(p.score, median_speed(p.speeds, self.window), self.cfg)
        return BoostedDetection(
            detection=replace(d, conf=adjust_confidence(d.conf, p.top, category, self.cfg)),
            raw_conf=d.conf,
            track_id=track_id,
            position=len(p.speeds) - 1,
            category=category,
            score=p.score,
        )


def boost_streaming(
    frames: Iterable[tuple[int, Sequence[tuple[int, Detection, float]]]],
    cfg: TrackBoostConfig = TrackBoostConfig(),
    window: int = 9,
) -> Iterator[tuple[int, list[BoostedDetection]]]:
    """Adjust ``(track_id, detection, speed)`` triples frame by frame.

    Frames must arrive in strictly increasing order.
    """
    booster = StreamingBooster(cfg, window)
    last: Optional[int] = None
    for frame, items in frames:
        if last is not None and frame <= last:
            raise OrderingError(f"frame {frame} arrived after frame {last}")
        last = frame
        yield frame, [booster.push(tid, d, speed) for tid, d, speed in items]
