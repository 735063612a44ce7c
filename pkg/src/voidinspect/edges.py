"""LoG edge detection and closed/open contour classification for one ball crop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_SIGMA = 1.5
DEFAULT_MIN_SLOPE = 1.0

_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = ndimage.generate_binary_structure(2, 2)


def log_kernel(sigma: float) -> np.ndarray:
    """Laplacian-of-Gaussian kernel of side ``2*ceil(3*sigma)+1``.

    The sampled kernel is shifted to sum to exactly zero and scaled so its
    negative centre lobe sums to -1 and its positive surround to +1.  The
    response is then a difference of weighted local means, in intensity
    levels; bright blobs give a negative response.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    half = int(math.ceil(3 * sigma))
    ax = np.arange(-half, half + 1, dtype=float)
    xx, yy = np.meshgrid(ax, ax)
    rr = (xx**2 + yy**2) / (2 * sigma**2)
    k = -(1 - rr) * np.exp(-rr)
    k -= k.mean()
    return k / k[k > 0].sum()


def log_response(crop: np.ndarray, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Convolve ``crop`` with :func:`log_kernel`, replicating edge pixels at the border."""
    kernel = log_kernel(sigma)
    if crop.shape[0] < kernel.shape[0] or crop.shape[1] < kernel.shape[1]:
        raise ValueError(
            f"crop {crop.shape[1]}x{crop.shape[0]} smaller than LoG kernel {kernel.shape[0]}x{kernel.shape[0]}"
        )
    return ndimage.convolve(crop.astype(float), kernel, mode="nearest")


@dataclass(frozen=True)
class EdgeMask:
    """Zero-crossing pixels of a LoG response.

    ``mask`` marks edge pixels; ``response`` is the LoG response they came
    from, so the sign on either side of each crossing stays available.
    """

    mask: np.ndarray
    response: np.ndarray

    @property
    def shape(self):
        return self.mask.shape

    @property
    def sign(self) -> np.ndarray:
        return np.sign(self.response).astype(np.int8)

    def __contains__(self, xy) -> bool:
        x, y = xy
        return bool(self.mask[y, x])

    def with_mask(self, mask: np.ndarray) -> "EdgeMask":
        return EdgeMask(np.asarray(mask, dtype=bool), self.response)

    def restrict(self, region: np.ndarray) -> "EdgeMask":
        return self.with_mask(self.mask & region)


def edge_mask(resp: np.ndarray, min_slope: float = DEFAULT_MIN_SLOPE) -> EdgeMask:
    """Mark zero crossings of ``resp``.

    A crossing exists between 4-neighbours of opposite sign whose responses
    differ by at least ``min_slope``.  The crossing is assigned to the pixel on
    the negative (brighter) side, which keeps edges one pixel thick and puts
    them on the void's own boundary.
    """
    resp = np.asarray(resp, dtype=float)
    mask = np.zeros(resp.shape, dtype=bool)
    for axis in (0, 1):
        a = resp.take(range(resp.shape[axis] - 1), axis=axis)
        b = resp.take(range(1, resp.shape[axis]), axis=axis)
        cross = ((a < 0) & (b > 0)) | ((a > 0) & (b < 0))
        cross &= np.abs(a - b) >= min_slope
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        mask[tuple(lo)] |= cross & (a < 0)
        mask[tuple(hi)] |= cross & (b < 0)
    return EdgeMask(mask, resp)


def four_connect(edges: EdgeMask) -> EdgeMask:
    """Close diagonal steps so the edge set is 4-connected.

    An 8-connected ring can slip diagonally through an 8-connected edge curve
    without sharing a pixel.  For every diagonal pair of edge pixels with no
    common 4-neighbour in the mask, the common 4-neighbour with the lower
    (brighter-side) response is added.
    """
    src = edges.mask
    out = src.copy()
    resp = edges.response
    h, w = src.shape
    ys, xs = np.nonzero(src)
    for y, x in zip(ys.tolist(), xs.tolist()):
        ny = y + 1
        if ny >= h:
            continue
        for nx in (x - 1, x + 1):
            if not (0 <= nx < w and src[ny, nx]):
                continue
            a, b = (y, nx), (ny, x)
            if out[a] or out[b]:
                continue
            out[a if resp[a] <= resp[b] else b] = True
    return edges.with_mask(out)


@dataclass
class ContourSet:
    """Edge pixels split into closed loops and the remaining open pixels.

    Each closed loop is an ``(n, 2)`` array of ``(x, y)`` in traversal order.
    ``open`` is a boolean mask.
    """

    closed: list = field(default_factory=list)
    open: np.ndarray | None = None

    def closed_mask(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        for loop in self.closed:
            out[loop[:, 1], loop[:, 0]] = True
        return out

    def open_pixels(self) -> np.ndarray:
        ys, xs = np.nonzero(self.open)
        return np.stack([xs, ys], axis=1)


def _neighbour_count(mask: np.ndarray) -> np.ndarray:
    counts = ndimage.convolve(mask.astype(np.int32), _SQUARE.astype(np.int32), mode="constant")
    return (counts - mask) * mask


def _is_simple_cycle(mask: np.ndarray) -> bool:
    n = int(mask.sum())
    if n < 4:
        return False
    if np.any(_neighbour_count(mask)[mask] != 2):
        return False
    _, k = ndimage.label(mask, structure=_SQUARE)
    return k == 1


def _prune_to_cycle(loop: np.ndarray) -> np.ndarray | None:
    """Drop redundant corner pixels until every pixel has exactly two neighbours.

    Returns ``None`` when the pixel set cannot be reduced to a single simple
    8-connected cycle this way.
    """
    loop = loop.copy()
    while True:
        if _is_simple_cycle(loop):
            return loop
        counts = _neighbour_count(loop)
        ys, xs = np.nonzero(loop & (counts > 2))
        removed = False
        for y, x in zip(ys.tolist(), xs.tolist()):
            trial = loop.copy()
            trial[y, x] = False
            nb = _neighbour_count(trial)
            y0, y1, x0, x1 = max(y - 1, 0), y + 2, max(x - 1, 0), x + 2
            local = trial[y0:y1, x0:x1]
            if np.any(nb[y0:y1, x0:x1][local] < 2):
                continue
            _, k = ndimage.label(trial, structure=_SQUARE)
            if k != 1:
                continue
            loop = trial
            removed = True
            break
        if not removed:
            return None


def _order_cycle(loop: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(loop)
    members = set(zip(xs.tolist(), ys.tolist()))
    start = min(members, key=lambda p: (p[1], p[0]))
    order = [start]
    prev, cur = None, start
    while True:
        nxt = None
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                cand = (cur[0] + dx, cur[1] + dy)
                if (dx or dy) and cand in members and cand != prev and cand != start:
                    if nxt is None or cand < nxt:
                        nxt = cand
        if nxt is None:
            break
        order.append(nxt)
        prev, cur = cur, nxt
    return np.array(order, dtype=np.int64)


def classify_contours(edges) -> ContourSet:
    """Split edge pixels into closed loops and open pixels.

    Every 8-connected edge chain is examined for enclosed holes (background
    regions, 4-connected, that cannot reach outside the chain).  The chain
    pixels 4-adjacent to a hole form the candidate loop; it counts as closed
    once reduced to a simple cycle.  All remaining edge pixels are open.
    """
    mask = edges.mask if isinstance(edges, EdgeMask) else np.asarray(edges, dtype=bool)
    h, w = mask.shape
    comps, n = ndimage.label(mask, structure=_SQUARE)
    closed_px = np.zeros_like(mask)
    loops = []
    for i, sl in enumerate(ndimage.find_objects(comps), start=1):
        y0, y1 = max(sl[0].start - 1, 0), min(sl[0].stop + 1, h)
        x0, x1 = max(sl[1].start - 1, 0), min(sl[1].stop + 1, w)
        comp = np.pad(comps[y0:y1, x0:x1] == i, 1)
        holes, nh = ndimage.label(~comp, structure=_CROSS)
        outside = holes[0, 0]
        for j in range(1, nh + 1):
            if j == outside:
                continue
            hole = holes == j
            ring = comp & ndimage.binary_dilation(hole, structure=_CROSS)
            cyc = _prune_to_cycle(ring)
            if cyc is None:
                continue
            loop = _order_cycle(cyc)
            loop[:, 0] += x0 - 1
            loop[:, 1] += y0 - 1
            loops.append(loop)
            closed_px[loop[:, 1], loop[:, 0]] = True
    loops.sort(key=lambda lp: (int(lp[0, 1]), int(lp[0, 0]), len(lp)))
    return ContourSet(closed=loops, open=mask & ~closed_px)


def polygon_interior(loop: np.ndarray, shape) -> np.ndarray:
    """Pixel centres strictly inside the closed polygon ``loop`` (crossing-number rule)."""
    h, w = shape
    inside = np.zeros(shape, dtype=bool)
    xs = loop[:, 0].astype(float)
    ys = loop[:, 1].astype(float)
    ymin, ymax = max(int(ys.min()), 0), min(int(ys.max()), h - 1)
    x2 = np.roll(xs, -1)
    y2 = np.roll(ys, -1)
    cols = np.arange(w, dtype=float)
    for row in range(ymin, ymax + 1):
        straddle = (ys > row) != (y2 > row)
        if not np.any(straddle):
            continue
        xa, ya, xb, yb = xs[straddle], ys[straddle], x2[straddle], y2[straddle]
        xint = xa + (row - ya) * (xb - xa) / (yb - ya)
        crossings = (cols[:, None] < xint[None, :]).sum(axis=1)
        inside[row] = crossings % 2 == 1
    return inside


def fill_closed(contours: ContourSet, shape) -> np.ndarray:
    """Even-odd fill of all closed loops, plus the loop pixels themselves."""
    parity = np.zeros(shape, dtype=bool)
    for loop in contours.closed:
        parity ^= polygon_interior(loop, shape)
    return parity | contours.closed_mask(shape)
