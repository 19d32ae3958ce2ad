"""Reflection false-positive suppression by instance/semantic fusion."""

__version__ = "0.1.0"

from .errors import SegfuseError
from .fusion import FusionConfig, FusionResult, InstancePrediction, fuse_instances
from .masks import BinaryMask, ScoreMap, mask_iou, mean_score_in_mask, rle_decode, rle_encode
from .metrics import (
    CurvePoint,
    GroundTruthInstance,
    MatchResult,
    MetricsReport,
    average_precision,
    average_recall,
    evaluate,
    match_detections,
    miss_rate_fppi_curve,
    pr_curve,
    summary_metrics,
)
from .occlusion import Heatmap, OcclusionConfig, ScorerBinding, occlusion_grid, occlusion_heatmap
from .pipeline import run_eval_pipeline
from .synth import SceneBundle, SceneConfig, expected_metrics, generate_benchmark, generate_scene
from .tuning import SelectionPolicy, SweepRow, SweepTable, select_threshold, sweep_thresholds
