"""Segment individual solder balls from a multi-ball X-ray image.

Pipeline: per-slice adaptive threshold -> circular Hough transform ->
radius-mode filtering -> row-wise interpolation of balls hidden by occlusion.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .raster import ring_offsets

log = logging.getLogger(__name__)

DETECTED = "detected"
INTERPOLATED = "interpolated"


class SegmentationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BallRegion:
    center: tuple
    radius: float
    provenance: str = DETECTED

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        if self.provenance not in (DETECTED, INTERPOLATED):
            raise ValueError(f"provenance must be {DETECTED!r} or {INTERPOLATED!r}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class SegmentationParams:
    slice_height: int = 300
    slice_width: int = 400
    threshold_window: int = 31
    threshold_offset: float = 5
    radius_bin_width: int = 4
    gap_factor: float = 1.5
    row_tolerance: float | None = None  # None: half the median ball radius
    min_radius: int = 8
    max_radius: int = 40

    def __post_init__(self):
        if self.slice_height <= 0 or self.slice_width <= 0:
            raise ValueError("slice dimensions must be positive")
        if self.threshold_window < 3 or self.threshold_window % 2 == 0:
            raise ValueError("threshold_window must be odd and >= 3")
        if self.radius_bin_width < 1:
            raise ValueError("radius_bin_width must be >= 1")
        if self.gap_factor <= 1:
            raise ValueError("gap_factor must be > 1")
        if self.min_radius < 3 or self.max_radius < self.min_radius:
            raise ValueError("need 3 <= min_radius <= max_radius")


@dataclass(frozen=True)
class RadiusHistogram:
    bin_width: int
    counts: dict = field(default_factory=dict)
    mode_radius: float = 0.0


# ---------------------------------------------------------------------------
# Steps 1-3: slice-wise adaptive threshold


def _box_sums(a: np.ndarray, half: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum and pixel count over a ``(2*half+1)`` square clipped to the array."""
    h, w = a.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    sat[1:, 1:] = a.astype(np.int64).cumsum(0).cumsum(1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - half, 0, h)[:, None]
    y1 = np.clip(ys + half + 1, 0, h)[:, None]
    x0 = np.clip(xs - half, 0, w)[None, :]
    x1 = np.clip(xs + half + 1, 0, w)[None, :]
    total = sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]
    count = (y1 - y0) * (x1 - x0)
    return total, count


def adaptive_threshold(img: np.ndarray, window: int, offset: float) -> np.ndarray:
    """Foreground where intensity < local mean - offset (window clipped at the border)."""
    total, count = _box_sums(img, window // 2)
    # I < total/count - offset, kept in exact arithmetic for integer offsets
    return img.astype(np.int64) * count < total - offset * count


def slice_bounds(shape, p: SegmentationParams):
    h, w = shape
    for y in range(0, h, p.slice_height):
        for x in range(0, w, p.slice_width):
            yield slice(y, min(y + p.slice_height, h)), slice(x, min(x + p.slice_width, w))


def threshold_by_slices(img: np.ndarray, p: SegmentationParams | None = None) -> np.ndarray:
    p = p or SegmentationParams()
    out = np.zeros(img.shape, dtype=bool)
    for sy, sx in slice_bounds(img.shape, p):
        out[sy, sx] = adaptive_threshold(img[sy, sx], p.threshold_window, p.threshold_offset)
    return out


# ---------------------------------------------------------------------------
# Step 4: circles


def ring_kernel(r: int) -> np.ndarray:
    off = ring_offsets(r)
    k = np.zeros((2 * r + 1, 2 * r + 1))
    k[off[:, 1] + r, off[:, 0] + r] = 1.0
    return k


def detect_circles(mask: np.ndarray, r_range) -> list[BallRegion]:
    """Circular Hough transform on the outline of the (hole-filled) foreground.

    The outline is dilated by one pixel before voting.  Accepts accumulator
    peaks reaching 60% of the ring's pixel count, strongest
    first, suppressing any peak within ``r_range[0]`` of an accepted centre.
    """
    r_lo, r_hi = int(r_range[0]), int(r_range[1])
    if r_lo < 3:
        raise ValueError("minimum radius must be >= 3")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    solid = ndimage.binary_fill_holes(mask)
    outline = solid & ~ndimage.binary_erosion(solid, border_value=0)
    # one pixel of slack so a ragged threshold boundary still votes for its circle
    src = ndimage.binary_dilation(outline, structure=np.ones((3, 3), bool)).astype(float)
    cands = []
    for r in range(r_lo, r_hi + 1):
        kern = ring_kernel(r)
        votes = np.rint(signal.fftconvolve(src, kern, mode="same")).astype(np.int64)
        need = 0.6 * kern.sum()
        ys, xs = np.nonzero(votes >= need)
        for y, x in zip(ys.tolist(), xs.tolist()):
            v = int(votes[y, x])
            cands.append((-v, -v / kern.sum(), -r, y, x))
    cands.sort()
    kept: list[tuple[int, int, int]] = []
    min_d2 = r_lo * r_lo
    for _, _, neg_r, y, x in cands:
        if any((x - kx) ** 2 + (y - ky) ** 2 < min_d2 for kx, ky, _ in kept):
            continue
        kept.append((x, y, -neg_r))
    return [BallRegion((x, y), r) for x, y, r in kept]


# ---------------------------------------------------------------------------
# Steps 5-6: radius mode


def quantize_radius(r: float, bin_width: int) -> float:
    return float(np.floor(r / bin_width + 0.5) * bin_width)


def filter_by_radius_mode(balls, bin_width: int = 4):
    """Keep balls whose quantized radius equals the modal one (ties -> larger radius)."""
    if not balls:
        raise ValueError("no balls to filter")
    q = [quantize_radius(b.radius, bin_width) for b in balls]
    counts = Counter(q)
    best = max(counts.values())
    mode = max(r for r, c in counts.items() if c == best)
    hist = RadiusHistogram(bin_width, dict(sorted(counts.items())), mode)
    return [b for b, qr in zip(balls, q) if qr == mode], hist


# ---------------------------------------------------------------------------
# Steps 7-8: rows and missing balls


def group_rows(balls, tolerance: float) -> list[list[BallRegion]]:
    rows: list[list[BallRegion]] = []
    for b in sorted(balls, key=lambda b: (b.center[1], b.center[0])):
        if rows and abs(b.center[1] - np.mean([m.center[1] for m in rows[-1]])) <= tolerance:
            rows[-1].append(b)
        else:
            rows.append([b])
    return [sorted(row, key=lambda b: b.center[0]) for row in rows]


def _row_tolerance(balls, p: SegmentationParams) -> float:
    if p.row_tolerance is not None:
        return p.row_tolerance
    return float(np.median([b.radius for b in balls])) / 2


def interpolate_missing(balls, p: SegmentationParams | None = None) -> list[BallRegion]:
    """Append balls for gaps wider than ``gap_factor * d_ref`` within each row.

    ``d_ref`` is the smallest neighbour spacing over all rows.  A gap of width
    ``g`` receives ``round(g / d_ref) - 1`` equally spaced balls whose radius is
    the mean of the two neighbours.
    """
    p = p or SegmentationParams()
    balls = list(balls)
    if len(balls) < 2:
        warnings.warn("fewer than two balls; nothing to interpolate", RuntimeWarning, stacklevel=2)
        return balls
    rows = group_rows(balls, _row_tolerance(balls, p))
    gaps = []
    for row in rows:
        for a, b in zip(row, row[1:]):
            gaps.append((a, b, float(np.hypot(b.center[0] - a.center[0], b.center[1] - a.center[1]))))
    if not gaps:
        return balls
    d_ref = min(g for _, _, g in gaps)
    if d_ref <= 0:
        return balls
    added = []
    for a, b, g in gaps:
        if g <= p.gap_factor * d_ref:
            continue
        n = int(np.floor(g / d_ref + 0.5)) - 1
        radius = (a.radius + b.radius) / 2
        for k in range(1, n + 1):
            t = k / (n + 1)
            cx = a.center[0] + t * (b.center[0] - a.center[0])
            cy = a.center[1] + t * (b.center[1] - a.center[1])
            added.append(BallRegion((cx, cy), radius, INTERPOLATED))
    return balls + added


def sort_row_major(balls, tolerance: float) -> list[BallRegion]:
    return [b for row in group_rows(balls, tolerance) for b in row]


def segment_balls(img: np.ndarray, p: SegmentationParams | None = None) -> list[BallRegion]:
    p = p or SegmentationParams()
    mask = threshold_by_slices(img, p)
    found = detect_circles(mask, (p.min_radius, p.max_radius))
    if not found:
        raise SegmentationError("no balls detected")
    kept, hist = filter_by_radius_mode(found, p.radius_bin_width)
    log.debug("radius histogram %s, mode %s", hist.counts, hist.mode_radius)
    balls = interpolate_missing(kept, p) if len(kept) >= 2 else kept
    h, w = img.shape
    balls = [b for b in balls if 0 <= b.center[0] < w and 0 <= b.center[1] < h]
    return sort_row_major(balls, _row_tolerance(balls, p))

