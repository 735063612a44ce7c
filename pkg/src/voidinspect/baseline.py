"""Reference detector: join open contour ends to their nearest partner, then fill.

This is the contour-closing approach the ring scanner is compared against.
It sees the same LoG edges but has no regional intensity test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.draw import line

from .assemble import AssemblyParams, InspectionReport, finalize_voids, measure
from .edges import EdgeMask, classify_contours, fill_closed

_SQUARE = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class BaselineParams:
    max_join_distance: float = 5.0

    def __post_init__(self):
        if self.max_join_distance < 0:
            raise ValueError("max_join_distance must be >= 0")


def chain_endpoints(open_mask: np.ndarray) -> np.ndarray:
    """``(n, 2)`` ``(x, y)`` of open pixels with at most one 8-neighbour."""
    m = open_mask.astype(np.int32)
    counts = ndimage.convolve(m, _SQUARE.astype(np.int32), mode="constant") - m
    ys, xs = np.nonzero(open_mask & (counts <= 1))
    return np.stack([xs, ys], axis=1)


def pair_endpoints(ends: np.ndarray, max_dist: float) -> list[tuple[int, int]]:
    """Greedy mutual-nearest pairing of endpoints within ``max_dist``."""
    n = len(ends)
    if n < 2 or max_dist <= 0:
        return []
    d = np.hypot(*(ends[:, None, :] - ends[None, :, :]).transpose(2, 0, 1)).astype(float)
    np.fill_diagonal(d, np.inf)
    free = np.ones(n, dtype=bool)
    pairs = []
    while True:
        sub = np.where(free[:, None] & free[None, :], d, np.inf)
        nearest = np.argmin(sub, axis=1)
        new = []
        for i in range(n):
            j = int(nearest[i])
            if free[i] and i < j and nearest[j] == i and sub[i, j] <= max_dist:
                new.append((i, j))
        if not new:
            return pairs
        for i, j in new:
            free[i] = free[j] = False
        pairs.extend(new)


def bridge_edges(edges: EdgeMask, p: BaselineParams) -> np.ndarray:
    """Edge mask with straight bridges drawn between paired open-chain ends."""
    contours = classify_contours(edges)
    ends = chain_endpoints(contours.open)
    out = edges.mask.copy()
    for i, j in pair_endpoints(ends, p.max_join_distance):
        rr, cc = line(int(ends[i, 1]), int(ends[i, 0]), int(ends[j, 1]), int(ends[j, 0]))
        out[rr, cc] = True
    return out


def baseline_detect(crop: np.ndarray, edges: EdgeMask, ball, p: BaselineParams | None = None,
                    a_min: int = 9, origin=(0, 0), region: np.ndarray | None = None) -> InspectionReport:
    p = p or BaselineParams()
    bridged = bridge_edges(edges, p)
    fill = fill_closed(classify_contours(bridged), crop.shape)
    regions = finalize_voids([], fill, crop.shape, AssemblyParams(a_min=a_min), region=region)
    return measure(regions, ball, crop.shape, origin, method="baseline")
