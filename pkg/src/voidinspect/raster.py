"""Raster primitives shared by every pipeline stage.

Images are plain ``numpy`` arrays: ``uint8`` of shape ``(height, width)`` for
grayscale, ``bool`` for masks and ``int32`` for label maps.  Coordinates are
always given as ``(x, y)`` = ``(column, row)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    """Raised for image files this package cannot represent exactly."""


def as_gray(pixels) -> np.ndarray:
    """Validate and return an 8-bit grayscale array (no rescaling)."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ImageFormatError(f"expected a 2-D grayscale array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ImageFormatError("intensities outside [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def load_image(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise ImageFormatError(f"unsupported bit depth: {path.name} has mode {mode}")
            if mode == "1":
                raise ImageFormatError(f"unsupported bit depth: {path.name} is 1-bit")
            if mode != "L":
                raise ImageFormatError(
                    f"unsupported color format: {path.name} has mode {mode}, expected 8-bit grayscale"
                )
            return np.array(im, dtype=np.uint8)
    except ImageFormatError:
        raise
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"unreadable image {path}: {exc}") from exc


def save_image(path, img: np.ndarray) -> None:
    """Write a grayscale or RGB ``uint8`` array as PNG, or grayscale as binary PGM."""
    path = Path(path)
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    if path.suffix.lower() == ".pgm":
        arr = as_gray(arr)
        h, w = arr.shape
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + arr.tobytes())
        return
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG")


# ---------------------------------------------------------------------------
# Rings


@dataclass(frozen=True)
class RingSample:
    """Pixels at integer radius ``radius`` ordered counterclockwise from angle 0.

    ``coords`` is an ``(n, 2)`` int array of ``(x, y)``.  Positions along the
    ring (beta) are indices into ``coords`` and wrap modulo ``len(self)``.
    """

    radius: int
    coords: np.ndarray

    def __len__(self) -> int:
        return len(self.coords)

    def values(self, img: np.ndarray) -> np.ndarray:
        return img[self.coords[:, 1], self.coords[:, 0]]


def rounded_distance(dx, dy):
    # Distances are square roots of integers, so x.5 ties never occur.
    return np.floor(np.sqrt(np.asarray(dx) ** 2 + np.asarray(dy) ** 2) + 0.5).astype(np.int64)


@lru_cache(maxsize=512)
def ring_offsets(r: int) -> np.ndarray:
    """Offsets ``(dx, dy)`` with rounded distance ``r``, sorted by ``atan2(dy, dx)`` in [0, 2pi)."""
    if r < 0:
        raise ValueError("ring radius must be >= 0")
    if r == 0:
        return np.zeros((1, 2), dtype=np.int64)
    span = np.arange(-r - 1, r + 2)
    dx, dy = np.meshgrid(span, span)
    sel = rounded_distance(dx, dy) == r
    dx, dy = dx[sel], dy[sel]
    ang = np.mod(np.arctan2(dy, dx), 2 * np.pi)
    order = np.argsort(ang, kind="stable")
    out = np.stack([dx[order], dy[order]], axis=1)
    out.setflags(write=False)
    return out


def ring_pixels(center, r: int, bounds) -> RingSample:
    """Integer ring of radius ``r`` around ``center``, clipped to ``bounds``.

    ``bounds`` is ``(height, width)`` (an array's ``shape``).
    """
    cx, cy = (int(v) for v in center)
    off = ring_offsets(int(r))
    xs = off[:, 0] + cx
    ys = off[:, 1] + cy
    h, w = bounds[:2]
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    coords = np.stack([xs[keep], ys[keep]], axis=1)
    coords.setflags(write=False)
    return RingSample(int(r), coords)


def disk_mask(shape, center, radius: float) -> np.ndarray:
    """Pixels whose Euclidean distance to ``center`` is at most ``radius``."""
    h, w = shape[:2]
    cx, cy = center
    yy, xx = np.mgrid[0:h, 0:w]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius


def round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


# ---------------------------------------------------------------------------
# Ball crops


def crop_origin(ball) -> tuple[int, int]:
    """Top-left ``(x, y)`` of the crop ``crop_ball`` would cut for ``ball``."""
    r = round_half_up(ball.radius)
    return round_half_up(ball.center[0]) - r, round_half_up(ball.center[1]) - r


def crop_ball(img: np.ndarray, ball) -> np.ndarray:
    """Square crop of side ``2*radius + 1`` centred on the ball.

    Pixels falling outside the source image are filled with the median of the
    in-bounds pixels on the border of the crop window, so the padding does not
    introduce artificial edges.
    """
    if ball.radius <= 0:
        raise ValueError("ball radius must be positive")
    h, w = img.shape
    cx, cy = ball.center
    if not (0 <= cx < w and 0 <= cy < h):
        raise ValueError(f"ball center ({cx}, {cy}) outside image {w}x{h}")
    r = round_half_up(ball.radius)
    side = 2 * r + 1
    x0, y0 = crop_origin(ball)
    x1, y1 = x0 + side, y0 + side
    sx0, sy0, sx1, sy1 = max(x0, 0), max(y0, 0), min(x1, w), min(y1, h)
    inner = img[sy0:sy1, sx0:sx1]
    if (sx0, sy0, sx1, sy1) == (x0, y0, x1, y1):
        return inner.copy()
    border = np.concatenate([inner[0], inner[-1], inner[:, 0], inner[:, -1]])
    fill = round_half_up(float(np.median(border)))
    out = np.full((side, side), fill, dtype=np.uint8)
    out[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = inner
    return out


# ---------------------------------------------------------------------------
# Connected components


class UnionFind:
    def __init__(self):
        self.parent = [0]

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if ra < rb:
            self.parent[rb] = ra
            return ra
        self.parent[ra] = rb
        return rb


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Two-pass 8-connectivity labeling with union-find.

    Returns ``(labels, k)``; labels are ``0`` for background and ``1..k`` in
    raster order of each component's first pixel.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    prov = np.zeros((h, w), dtype=np.int64)
    uf = UnionFind()
    ys, xs = np.nonzero(mask)
    for y, x in zip(ys.tolist(), xs.tolist()):
        neigh = []
        if x > 0 and prov[y, x - 1]:
            neigh.append(prov[y, x - 1])
        if y > 0:
            for nx in (x - 1, x, x + 1):
                if 0 <= nx < w and prov[y - 1, nx]:
                    neigh.append(prov[y - 1, nx])
        if not neigh:
            prov[y, x] = uf.make()
            continue
        root = uf.find(int(neigh[0]))
        for n in neigh[1:]:
            root = uf.union(root, int(n))
        prov[y, x] = root
    labels = np.zeros((h, w), dtype=np.int32)
    final: dict[int, int] = {}
    for y, x in zip(ys.tolist(), xs.tolist()):
        root = uf.find(int(prov[y, x]))
        if root not in final:
            final[root] = len(final) + 1
        labels[y, x] = final[root]
    return labels, len(final)


def neighbors8(x: int, y: int):
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                yield x + dx, y + dy
