"""Constant-velocity Kalman tracker with greedy IOU association.

State is ``[cx, cy, w, h, vcx, vcy, vw, vh]`` with one frame per time step.
Every detection is assigned a track on the frame it arrives; there is no
confirmation delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Box, Detection, OrderingError, ValidationError, iou

_MOTION = np.eye(8)
_MOTION[:4, 4:] = np.eye(4)
_OBSERVE = np.eye(4, 8)


@dataclass(frozen=True)
class TrackerConfig:
    iou_min: float = 0.1
    max_missed: int = 15
    process_noise: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 0.25, 0.25, 0.25, 0.25)
    measurement_noise: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    initial_covariance: float = 10.0
    speed_window: int = 9

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 < self.iou_min < 1.0:
            problems.append(f"iou_min must be in (0, 1), got {self.iou_min}")
        if self.max_missed < 1:
            problems.append(f"max_missed must be positive, got {self.max_missed}")
        if len(self.process_noise) != 8 or any(q <= 0 for q in self.process_noise):
            problems.append("process_noise needs 8 positive values")
        if len(self.measurement_noise) != 4 or any(r <= 0 for r in self.measurement_noise):
            problems.append("measurement_noise needs 4 positive values")
        if self.initial_covariance <= 0:
            problems.append("initial_covariance must be positive")
        if self.speed_window < 1 or self.speed_window % 2 == 0:
            problems.append(f"speed_window must be an odd positive integer, got {self.speed_window}")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def from_box(cls, box: Box, initial_covariance: float = 10.0) -> "KalmanState":
        cx, cy = box.center
        mean = np.array([cx, cy, box.w, box.h, 0.0, 0.0, 0.0, 0.0])
        return cls(mean, np.eye(8) * initial_covariance)

    def box(self) -> Box:
        cx, cy, w, h = self.mean[:4]
        return Box.from_center(float(cx), float(cy), float(w), float(h))

    @property
    def speed(self) -> float:
        return math.hypot(float(self.mean[4]), float(self.mean[5]))


def predict(state: KalmanState, cfg: TrackerConfig = TrackerConfig()) -> KalmanState:
    mean = _MOTION @ state.mean
    cov = _MOTION @ state.covariance @ _MOTION.T + np.diag(cfg.process_noise)
    return KalmanState(mean, 0.5 * (cov + cov.T))


def update(state: KalmanState, d: Detection, cfg: TrackerConfig = TrackerConfig()) -> KalmanState:
    cx, cy = d.box.center
    z = np.array([cx, cy, d.box.w, d.box.h])
    R = np.diag(cfg.measurement_noise)
    P = state.covariance
    S = _OBSERVE @ P @ _OBSERVE.T + R
    K = np.linalg.solve(S, _OBSERVE @ P).T
    mean = state.mean + K @ (z - _OBSERVE @ state.mean)
    # Joseph form keeps the covariance symmetric PSD.
    A = np.eye(8) - K @ _OBSERVE
    cov = A @ P @ A.T + K @ R @ K.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


@dataclass
class AssociationResult:
    matches: list[tuple[int, int]]
    unmatched_detections: list[int]
    unmatched_tracks: list[int]


def associate(
    predicted: Sequence[tuple[int, Box]], detections: Sequence[Detection], iou_min: float
) -> AssociationResult:
    """Greedy matching on descending IOU.

    Ties are broken by lower track id, then lower detection index. Pairs
    below ``iou_min`` never match.
    """
    pairs = []
    for track_id, box in predicted:
        for j, d in enumerate(detections):
            overlap = iou(box, d.box)
            if overlap >= iou_min:
                pairs.append((-overlap, track_id, j))
    pairs.sort()

    used_tracks: set[int] = set()
    used_dets: set[int] = set()
    matches = []
    for _, track_id, j in pairs:
        if track_id in used_tracks or j in used_dets:
            continue
        used_tracks.add(track_id)
        used_dets.add(j)
        matches.append((track_id, j))
    return AssociationResult(
        matches=matches,
        unmatched_detections=[j for j in range(len(detections)) if j not in used_dets],
        unmatched_tracks=[t for t, _ in predicted if t not in used_tracks],
    )


@dataclass
class TrackHistory:
    track_id: int
    kalman: KalmanState
    detections: list[Detection] = field(default_factory=list)
    confidences: list[float] = field(default_factory=list)
    speeds: list[float] = field(default_factory=list)
    missed: int = 0

    def append(self, d: Detection, speed: float) -> None:
        if self.detections and d.frame <= self.detections[-1].frame:
            raise OrderingError(f"track {self.track_id}: frame {d.frame} is not after {self.detections[-1].frame}")
        self.detections.append(d)
        self.confidences.append(d.conf)
        self.speeds.append(speed)


def smoothed_speeds(speeds: Sequence[float], window: int) -> list[float]:
    """Centered running median, window truncated at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"window must be an odd positive integer, got {window}")
    half = window // 2
    n = len(speeds)
    return [float(np.median(speeds[max(0, i - half) : min(n, i + half + 1)])) for i in range(n)]


def median_speed(track: TrackHistory | Sequence[float], window: int = 9) -> float:
    """Median of the window-smoothed per-detection speeds of a track."""
    speeds = track.speeds if isinstance(track, TrackHistory) else list(track)
    if not speeds:
        raise ValidationError("median_speed of an empty track is undefined")
    return float(np.median(smoothed_speeds(speeds, window)))


class Tracker:
    """Frame-ordered multi-object tracker.

    Call :meth:`step` once per frame (gaps are allowed; skipped frames count
    as misses). Finished and live tracks are both kept in :attr:`tracks`.
    """

    def __init__(self, cfg: Optional[TrackerConfig] = None) -> None:
        self.cfg = cfg or TrackerConfig()
        self.tracks: dict[int, TrackHistory] = {}
        self.active: list[int] = []
        self._next_id = 0
        self._last_frame: Optional[int] = None

    def _advance(self) -> None:
        for tid in self.active:
            t = self.tracks[tid]
            t.kalman = predict(t.kalman, self.cfg)

    def _retire(self) -> None:
        self.active = [tid for tid in self.active if self.tracks[tid].missed <= self.cfg.max_missed]

    def step(self, frame: int, detections: Sequence[Detection]) -> list[int]:
        """Track one frame and return the track id of every input detection."""
        if self._last_frame is not None and frame <= self._last_frame:
            raise OrderingError(f"frame {frame} is not after previously stepped frame {self._last_frame}")
        for d in detections:
            if d.frame != frame:
                raise OrderingError(f"detection frame {d.frame} does not match stepped frame {frame}")

        if self._last_frame is not None:
            for _ in range(frame - self._last_frame - 1):
                if not self.active:
                    break
                self._advance()
                for tid in self.active:
                    self.tracks[tid].missed += 1
                self._retire()
        self._last_frame = frame

        self._advance()
        predicted = [(tid, self.tracks[tid].kalman.box()) for tid in self.active]
        result = associate(predicted, detections, self.cfg.iou_min)

        assigned = [-1] * len(detections)
        for tid, j in result.matches:
            t = self.tracks[tid]
            t.kalman = update(t.kalman, detections[j], self.cfg)
            t.missed = 0
            t.append(detections[j], t.kalman.speed)
            assigned[j] = tid
        for tid in result.unmatched_tracks:
            self.tracks[tid].missed += 1
        for j in result.unmatched_detections:
            tid = self._next_id
            self._next_id += 1
            t = TrackHistory(tid, KalmanState.from_box(detections[j].box, self.cfg.initial_covariance))
            t.append(detections[j], t.kalman.speed)
            self.tracks[tid] = t
            self.active.append(tid)
            assigned[j] = tid
        self._retire()
        return assigned

    def histories(self) -> list[TrackHistory]:
        return [self.tracks[tid] for tid in sorted(self.tracks)]
