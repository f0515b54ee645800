"""Streaming cross-frame correlation and evaluation for video polyp detection.

The package filters per-frame detector outputs with a sliding similarity-
gated window (removing transient false positives and interpolating missed
detections), scores results with polyp-level metrics, and generates
deterministic synthetic scenarios for verification.
"""

from .correlator import (
    CorrelationWindow,
    FilteredFrame,
    IscuConfig,
    StreamCorrelator,
    WindowSlot,
    correct_missed,
    eliminate_noise,
    process_sequence,
)
from .errors import InputError, SequencingError
from .evaluation import (
    EvalReport,
    FrameOutcome,
    PrPoint,
    aggregate,
    average_precision,
    evaluate_sequences,
    match_boxes,
    match_frame,
    mpt,
    pdr,
    pr_curve,
)
from .geometry import (
    BoundingBox,
    BoxOrigin,
    FrameDetections,
    FrameMeta,
    GroundTruthBox,
    ScoredBox,
    adaptive_iou_threshold,
    centroid_to_corners,
    clip_box,
    corners_to_centroid,
    iou,
)
from .similarity import GrayFrame, SsimParams, downsample, prepare_luma, similar_frames, ssim, to_luma
from .synthetic import (
    ConfidenceModel,
    Scenario,
    ScenarioConfig,
    TrackSpec,
    generate_scenario,
    simulate_detector,
    standard_noise_config,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "BoxOrigin",
    "ConfidenceModel",
    "CorrelationWindow",
    "EvalReport",
    "FilteredFrame",
    "FrameDetections",
    "FrameMeta",
    "FrameOutcome",
    "GrayFrame",
    "GroundTruthBox",
    "InputError",
    "IscuConfig",
    "PrPoint",
    "Scenario",
    "ScenarioConfig",
    "ScoredBox",
    "SequencingError",
    "SsimParams",
    "StreamCorrelator",
    "TrackSpec",
    "WindowSlot",
    "adaptive_iou_threshold",
    "aggregate",
    "average_precision",
    "centroid_to_corners",
    "clip_box",
    "corners_to_centroid",
    "correct_missed",
    "downsample",
    "eliminate_noise",
    "evaluate_sequences",
    "generate_scenario",
    "iou",
    "match_boxes",
    "match_frame",
    "mpt",
    "pdr",
    "pr_curve",
    "prepare_luma",
    "process_sequence",
    "similar_frames",
    "simulate_detector",
    "ssim",
    "standard_noise_config",
    "to_luma",
]
