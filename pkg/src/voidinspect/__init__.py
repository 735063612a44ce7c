"""Void detection in BGA solder-ball X-ray images by multi-directional ring scanning."""

from .assemble import AssemblyParams, InspectionReport, VoidRegion
from .baseline import BaselineParams, baseline_detect
from .edges import EdgeMask, edge_mask, log_response
from .pipeline import DetectionParams, inspect_ball, inspect_ball_methods, prepare_ball
from .raster import ImageFormatError, crop_ball, crop_origin, load_image, save_image
from .scan import ScanParams, Void1D, detect_1d_voids
from .segment import BallRegion, SegmentationError, SegmentationParams, segment_balls
from .synth import GroundTruth, ScoreCard, SynthSpec, generate, score

__version__ = "0.1.0"

__all__ = [
    "AssemblyParams", "BallRegion", "BaselineParams", "DetectionParams", "EdgeMask", "GroundTruth",
    "ImageFormatError", "InspectionReport", "ScanParams", "ScoreCard", "SegmentationError",
    "SegmentationParams", "SynthSpec", "Void1D", "VoidRegion", "baseline_detect", "crop_ball", "crop_origin", "detect_1d_voids",
    "edge_mask", "generate", "inspect_ball", "inspect_ball_methods", "load_image", "log_response",
    "prepare_ball", "save_image", "score", "segment_balls",
]
