"""Angular ring scanning: find 1-D void spans between positive and negative edges.

Each ring around the ball centre is walked counterclockwise.  A span opens at
a positive edge (background -> void, intensities rising through an edge
pixel) and closes just before the next negative edge (void -> background).
Spans that stand out from the ring's background by ``thr_1d`` are 1-D voids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import RingSample, ring_pixels

RELATIVE = "relative"
LITERAL = "literal"


@dataclass(frozen=True)
class ScanParams:
    thr_1d: float = 6.0
    max_span_fraction: float = 0.5
    acceptance_rule: str = RELATIVE
    ring_sigma: float = 0.7  # circular smoothing of the edge-ordering values

    def __post_init__(self):
        if self.thr_1d < 0:
            raise ValueError("thr_1d must be >= 0")
        if not 0 < self.max_span_fraction <= 1:
            raise ValueError("max_span_fraction must be in (0, 1]")
        if self.ring_sigma < 0:
            raise ValueError("ring_sigma must be >= 0")
        if self.acceptance_rule not in (RELATIVE, LITERAL):
            raise ValueError(f"acceptance_rule must be {RELATIVE!r} or {LITERAL!r}")


@dataclass(frozen=True)
class Void1D:
    """Accepted span on ring ``r``.

    ``beta_start`` and ``beta_end`` are the first and last ring positions of the
    span (inclusive, cyclic); the negative edge that closed it is the position
    after ``beta_end``.  ``pixels`` is ``(n, 2)`` of ``(x, y)``.
    """

    r: int
    beta_start: int
    beta_end: int
    pixels: np.ndarray
    mean_intensity: float
    span_max: float
    span_min: float

    def __len__(self) -> int:
        return len(self.pixels)


def _edge_flags(ring: RingSample, edges) -> np.ndarray:
    mask = getattr(edges, "mask", edges)
    return np.asarray(mask)[ring.coords[:, 1], ring.coords[:, 0]]


def _monotone(values) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=float)
    prev, nxt = np.roll(v, 1), np.roll(v, -1)
    return (prev < v) & (v < nxt), (prev > v) & (v > nxt)


def find_positive_edges(ring: RingSample, intensities, edges) -> list[int]:
    """Ring positions where intensity strictly rises through an edge pixel."""
    if len(ring) < 3:
        return []
    rising, _ = _monotone(intensities)
    return np.flatnonzero(rising & _edge_flags(ring, edges)).tolist()


def find_negative_edges(ring: RingSample, intensities, edges) -> list[int]:
    if len(ring) < 3:
        return []
    _, falling = _monotone(intensities)
    return np.flatnonzero(falling & _edge_flags(ring, edges)).tolist()


def _span_cap(n: int, p: ScanParams) -> int:
    return int(np.floor(p.max_span_fraction * n))


def span_extent(ring, intensities, edges, start: int, p: ScanParams) -> int | None:
    """Number of pixels from ``start`` up to (not including) the next negative edge.

    ``None`` when no negative edge turns up within the span cap.
    """
    n = len(ring)
    if n < 3:
        return None
    negative = np.zeros(n, dtype=bool)
    negative[find_negative_edges(ring, intensities, edges)] = True
    cap = _span_cap(n, p)
    for k in range(1, min(cap, n - 1) + 1):
        if negative[(start + k) % n]:
            return k
    return None


def accepts(values, background: float, p: ScanParams) -> bool:
    values = np.asarray(values, dtype=float)
    mean, vmax, vmin = values.mean(), values.max(), values.min()
    if p.acceptance_rule == LITERAL:
        return mean > p.thr_1d and abs(vmax - vmin) > p.thr_1d
    return mean - background >= p.thr_1d and vmax - background >= p.thr_1d


def scan_span(ring, intensities, edges, start: int, p: ScanParams, background: float,
              order_values=None) -> Void1D | None:
    """Scan from positive edge ``start`` to the next negative edge and test the span.

    ``intensities`` are the ring's raw values used for the acceptance test.
    ``order_values`` (default: ``intensities``) decide which pixels are rising
    or falling edges; a lightly smoothed copy makes that decision robust to
    pixel noise.
    """
    order = intensities if order_values is None else order_values
    length = span_extent(ring, order, edges, start, p)
    if length is None:
        return None
    n = len(ring)
    idx = (start + np.arange(length)) % n
    vals = np.asarray(intensities, dtype=float)[idx]
    if not accepts(vals, background, p):
        return None
    return Void1D(
        r=ring.radius,
        beta_start=int(start),
        beta_end=int(idx[-1]),
        pixels=ring.coords[idx],
        mean_intensity=float(vals.mean()),
        span_max=float(vals.max()),
        span_min=float(vals.min()),
    )


def candidate_groups(ring, order_values, edges, p: ScanParams) -> list[tuple[int, list[int]]]:
    """Group positive edges by the negative edge their scan runs into.

    Returns ``(negative, starts)`` pairs where ``starts`` are the positive edges
    after the preceding negative edge whose span to ``negative`` fits under
    the cap, earliest first.  Spans from one group are nested, and spans from
    different groups never overlap.  The grouping depends only on the cyclic
    sequence of edges, not on where position 0 is.
    """
    n = len(ring)
    pos = find_positive_edges(ring, order_values, edges)
    neg = find_negative_edges(ring, order_values, edges)
    if not pos or not neg:
        return []
    cap = _span_cap(n, p)
    is_pos = np.zeros(n, dtype=bool)
    is_pos[pos] = True
    is_neg = np.zeros(n, dtype=bool)
    is_neg[neg] = True
    first = neg[0]
    out = []
    pending: list[int] = []
    for k in range(1, n + 1):
        i = (first + k) % n
        if is_neg[i]:
            starts = [s for s in pending if (i - s) % n <= cap]
            if starts:
                out.append((i, starts))
            pending = []
        elif is_pos[i]:
            pending.append(i)
    return sorted(out)


def ring_background(values, spans, n: int) -> float:
    """Median of ring values outside all candidate spans (whole ring if none remain)."""
    values = np.asarray(values, dtype=float)
    outside = np.ones(n, dtype=bool)
    for s, length in spans:
        outside[(s + np.arange(length)) % n] = False
    if not outside.any():
        return float(np.median(values))
    return float(np.median(values[outside]))


def scan_ring(ring: RingSample, values, order_values, edges, p: ScanParams) -> list[Void1D]:
    """Accepted 1-D voids on one ring.

    The background is taken outside the shortest candidate of every group.
    Within a group the longest span that passes the intensity test wins.
    """
    n = len(ring)
    groups = candidate_groups(ring, order_values, edges, p)
    if not groups:
        return []
    shortest = [(starts[-1], (neg - starts[-1]) % n) for neg, starts in groups]
    background = ring_background(values, shortest, n)
    found = []
    for _, starts in groups:
        for start in starts:
            v = scan_span(ring, values, edges, start, p, background, order_values=order_values)
            if v is not None:
                found.append(v)
                break
    return found


def detect_1d_voids(crop: np.ndarray, edges, center, r_max: int, p: ScanParams | None = None,
                    order_values: np.ndarray | None = None) -> dict[int, list[Void1D]]:
    """Scan rings ``r_max`` down to 1 around ``center``; returns ring -> spans.

    ``order_values`` (default ``crop``) decide rising and falling edges after
    a circular Gaussian of ``p.ring_sigma`` along each ring; the acceptance
    test always uses ``crop``.  Rings without accepted spans are omitted.
    """
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    p = p or ScanParams()
    order_img = crop if order_values is None else order_values
    out: dict[int, list[Void1D]] = {}
    for r in range(int(r_max), 0, -1):
        ring = ring_pixels(center, r, crop.shape)
        if len(ring) < 3:
            continue
        order = ring.values(order_img).astype(float)
        if p.ring_sigma > 0:
            # rings zig-zag radially; smoothing along the ring removes that wobble
            order = np.round(ndimage.gaussian_filter1d(order, p.ring_sigma, mode="wrap"), 6)
        found = scan_ring(ring, ring.values(crop), order, edges, p)
        if found:
            out[r] = found
    return out
