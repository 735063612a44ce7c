"""Assemble 1-D spans into 2-D voids, label regions, and measure void percentage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .raster import disk_mask, label_components, neighbors8
from .scan import Void1D


@dataclass(frozen=True)
class AssemblyParams:
    intensity_tol: float = 6.0
    a_min: int = 9

    def __post_init__(self):
        if self.intensity_tol < 0:
            raise ValueError("intensity_tol must be >= 0")
        if self.a_min < 1:
            raise ValueError("a_min must be >= 1")


@dataclass(eq=False)
class Void2D:
    spans: list = field(default_factory=list)
    by_ring: dict = field(default_factory=dict)
    mean_intensity: float = 0.0
    n_pixels: int = 0
    active: bool = True

    def add(self, span: Void1D) -> None:
        pts = {(int(x), int(y)) for x, y in span.pixels}
        self.spans.append(span)
        self.by_ring.setdefault(span.r, set()).update(pts)
        n = len(span.pixels)
        self.mean_intensity = (self.mean_intensity * self.n_pixels + span.mean_intensity * n) / (self.n_pixels + n)
        self.n_pixels += n

    def absorb(self, other: "Void2D") -> None:
        self.spans.extend(other.spans)
        for r, pts in other.by_ring.items():
            self.by_ring.setdefault(r, set()).update(pts)
        total = self.n_pixels + other.n_pixels
        self.mean_intensity = (self.mean_intensity * self.n_pixels + other.mean_intensity * other.n_pixels) / total
        self.n_pixels = total

    @property
    def pixels(self) -> set:
        out = set()
        for pts in self.by_ring.values():
            out |= pts
        return out

    def touches(self, span: Void1D, ring: int) -> bool:
        prev = self.by_ring.get(ring)
        if not prev:
            return False
        return any(nb in prev for x, y in span.pixels for nb in neighbors8(int(x), int(y)))


def assemble_2d(spans: dict, p: AssemblyParams | None = None) -> list[Void2D]:
    """Stack 1-D voids from the outermost ring inwards.

    A span joins an active void when it is 8-adjacent to that void's pixels on
    the next outer ring and the two mean intensities agree within
    ``intensity_tol``.  A span that qualifies for several voids merges them.
    A void that gains nothing on a ring is closed for good.
    """
    p = p or AssemblyParams()
    voids: list[Void2D] = []
    if not spans:
        return voids
    r_max = max(spans)
    for r in range(r_max, 0, -1):
        ring_spans = sorted(spans.get(r, []), key=lambda s: s.beta_start)
        open_voids = [v for v in voids if v.active]
        grew: set[int] = set()
        for span in ring_spans:
            hits = [
                v for v in open_voids
                if v.active and v.touches(span, r + 1)
                and abs(span.mean_intensity - v.mean_intensity) <= p.intensity_tol
            ]
            if not hits:
                fresh = Void2D()
                fresh.add(span)
                voids.append(fresh)
                grew.add(id(fresh))
                continue
            keep = hits[0]
            for other in hits[1:]:
                keep.absorb(other)
                other.active = False
                voids.remove(other)
                open_voids.remove(other)
            keep.add(span)
            grew.add(id(keep))
        for v in voids:
            if v.active and id(v) not in grew:
                v.active = False
    return voids


@dataclass(frozen=True)
class VoidRegion:
    """One labelled void; ``pixels`` is ``(n, 2)`` of crop-local ``(x, y)``."""

    label: int
    pixels: np.ndarray
    area: int
    centroid: tuple
    bbox: tuple


def regions_from_mask(mask: np.ndarray, a_min: int) -> list[VoidRegion]:
    labels, k = label_components(mask)
    comps = []
    for lab in range(1, k + 1):
        ys, xs = np.nonzero(labels == lab)
        if len(xs) < a_min:
            continue
        comps.append((xs, ys))
    comps.sort(key=lambda c: (-len(c[0]), int(c[1][0]), int(c[0][0])))
    out = []
    for i, (xs, ys) in enumerate(comps, start=1):
        out.append(VoidRegion(
            label=i,
            pixels=np.stack([xs, ys], axis=1),
            area=int(len(xs)),
            centroid=(float(xs.mean()), float(ys.mean())),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
        ))
    return out


def void_mask(voids, closed_fill, shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool) if closed_fill is None else np.asarray(closed_fill, dtype=bool).copy()
    for v in voids:
        for x, y in v.pixels:
            mask[y, x] = True
    return mask


def finalize_voids(voids, closed_fill, shape, p: AssemblyParams | None = None,
                   region: np.ndarray | None = None) -> list[VoidRegion]:
    """Union 2-D voids with filled closed contours, label, and drop tiny regions.

    ``region`` optionally restricts the union (e.g. to the ball disk).  Labels
    run ``1..K`` by decreasing area.
    """
    p = p or AssemblyParams()
    mask = void_mask(voids, closed_fill, shape)
    if region is not None:
        mask &= region
    return regions_from_mask(mask, p.a_min)


@dataclass
class InspectionReport:
    ball: object
    ball_area: int
    regions: list
    total_void_area: int
    void_percentage: float
    origin: tuple = (0, 0)
    method: str = "proposed"

    def mask(self, shape) -> np.ndarray:
        """Void pixels of this ball in full-image coordinates."""
        out = np.zeros(shape, dtype=bool)
        h, w = shape
        x0, y0 = self.origin
        for reg in self.regions:
            xs = reg.pixels[:, 0] + x0
            ys = reg.pixels[:, 1] + y0
            ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            out[ys[ok], xs[ok]] = True
        return out


def ball_disk(ball, shape, origin=(0, 0)) -> np.ndarray:
    cx, cy = ball.center
    return disk_mask(shape, (cx - origin[0], cy - origin[1]), ball.radius)


def void_percent(void_area, ball_area) -> float:
    if ball_area <= 0:
        raise ValueError("ball area is zero")
    return void_area / ball_area * 100


def measure(regions, ball, shape, origin=(0, 0), method: str = "proposed") -> InspectionReport:
    """Void percentage = total void area / ball area * 100.

    Ball area counts the crop pixels within the ball radius of its centre.
    """
    ball_area = int(ball_disk(ball, shape, origin).sum())
    total = int(sum(r.area for r in regions))
    return InspectionReport(
        ball=ball,
        ball_area=ball_area,
        regions=list(regions),
        total_void_area=total,
        void_percentage=void_percent(total, ball_area),
        origin=tuple(origin),
        method=method,
    )
