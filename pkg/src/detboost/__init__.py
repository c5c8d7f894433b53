"""Detector-agnostic confidence boosting for video object detections.

Classifier score fusion, a Kalman IOU tracker, track-score based confidence
adjustment, a single-class mAP evaluator and a synthetic scenario generator.
"""

from .core import Box, Detection, GroundTruthBox, ImageDims, OrderingError, ValidationError, expand_box, iou
from .evaluation import EvalConfig, average_precision, map50, match_predictions
from .fusion import FusionConfig, build_crop_manifest, fuse_confidence, fuse_detections, label_tp_fp
from .pipeline import PipelineConfig, run_pipeline
from .trackboost import (
    TrackBoostConfig,
    TrackCategory,
    adjust_confidence,
    boost_offline,
    boost_streaming,
    categorize,
    score_step,
    track_score,
)
from .tracker import Tracker, TrackerConfig, median_speed

__version__ = "0.1.0"
