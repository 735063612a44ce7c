"""Per-ball void inspection: edges -> 1-D spans -> 2-D voids -> regions -> report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .assemble import AssemblyParams, InspectionReport, assemble_2d, ball_disk, finalize_voids, measure
from .baseline import BaselineParams, baseline_detect
from .edges import (DEFAULT_MIN_SLOPE, DEFAULT_SIGMA, EdgeMask, classify_contours, edge_mask, fill_closed,
                    four_connect, log_response)
from .raster import crop_origin, round_half_up
from .scan import ScanParams, detect_1d_voids


@dataclass(frozen=True)
class DetectionParams:
    sigma: float = DEFAULT_SIGMA
    min_slope: float = DEFAULT_MIN_SLOPE
    scan: ScanParams = field(default_factory=ScanParams)
    assembly: AssemblyParams = field(default_factory=AssemblyParams)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.min_slope < 0:
            raise ValueError("min_slope must be >= 0")


@dataclass
class BallWork:
    """Everything derived from one crop that both detection methods share."""

    crop: np.ndarray
    flat: np.ndarray
    disk: np.ndarray
    center: tuple
    r_max: int
    origin: tuple
    edges: EdgeMask
    smooth: np.ndarray


def prepare_ball(crop: np.ndarray, ball, params: DetectionParams | None = None, origin=None) -> BallWork:
    """Flatten everything outside the ball and compute its LoG edges.

    Pixels beyond the ball radius are replaced by the median of the ball so the
    strong ball/background boundary does not swamp the faint void edges.
    """
    params = params or DetectionParams()
    if origin is None:
        origin = crop_origin(ball)
    x0, y0 = origin
    disk = ball_disk(ball, crop.shape, origin)
    if not disk.any():
        raise ValueError("ball disk does not intersect the crop")
    flat = crop.copy()
    flat[~disk] = round_half_up(float(np.median(crop[disk])))
    resp = log_response(flat, params.sigma)
    edges = edge_mask(resp, params.min_slope).restrict(disk)
    smooth = ndimage.gaussian_filter(flat.astype(float), params.sigma, mode="nearest", truncate=3.0)
    # quantize so that strict comparisons ignore float summation-order noise
    smooth = np.round(smooth, 6)
    center = (round_half_up(ball.center[0]) - x0, round_half_up(ball.center[1]) - y0)
    return BallWork(crop, flat, disk, center, max(round_half_up(ball.radius), 1), tuple(origin), edges, smooth)


def detect_proposed(work: BallWork, ball, params: DetectionParams) -> InspectionReport:
    contours = classify_contours(work.edges)
    closed_fill = fill_closed(contours, work.crop.shape) & work.disk
    open_edges = four_connect(work.edges.with_mask(contours.open))
    open_edges = open_edges.restrict(work.disk & ~contours.closed_mask(work.crop.shape))
    spans = detect_1d_voids(work.flat, open_edges, work.center, work.r_max, params.scan,
                            order_values=work.smooth)
    voids = assemble_2d(spans, params.assembly)
    regions = finalize_voids(voids, closed_fill, work.crop.shape, params.assembly, region=work.disk)
    return measure(regions, ball, work.crop.shape, work.origin, method="proposed")


def inspect_ball(crop: np.ndarray, ball, params: DetectionParams | None = None, origin=None) -> InspectionReport:
    params = params or DetectionParams()
    work = prepare_ball(crop, ball, params, origin)
    return detect_proposed(work, ball, params)


PROPOSED = "proposed"
BASELINE = "baseline"
METHODS = (PROPOSED, BASELINE)


def detect_baseline(work: BallWork, ball, params: DetectionParams, bp: BaselineParams | None = None) -> InspectionReport:
    return baseline_detect(work.crop, work.edges, ball, bp, a_min=params.assembly.a_min,
                           origin=work.origin, region=work.disk)


def run_methods(work: BallWork, ball, methods, params: DetectionParams,
                bp: BaselineParams | None = None) -> dict[str, InspectionReport]:
    out = {}
    for m in methods:
        if m == PROPOSED:
            out[m] = detect_proposed(work, ball, params)
        elif m == BASELINE:
            out[m] = detect_baseline(work, ball, params, bp)
        else:
            raise ValueError(f"unknown method {m!r}")
    return out


def inspect_ball_methods(crop: np.ndarray, ball, methods=(PROPOSED,), params: DetectionParams | None = None,
                         bp: BaselineParams | None = None, origin=None) -> dict[str, InspectionReport]:
    """Run the requested methods on one crop, sharing the edge computation."""
    params = params or DetectionParams()
    return run_methods(prepare_ball(crop, ball, params, origin), ball, methods, params, bp)
