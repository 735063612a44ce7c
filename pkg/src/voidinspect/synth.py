"""Synthetic BGA X-ray images with exact void ground truth, and detector scoring.

Balls are flat disks darker than the board; voids are brighter disks inside
them (overlapping disks give irregular voids).  Every image is a pure function
of its :class:`SynthSpec`, including the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .assemble import ball_disk, void_percent
from .raster import disk_mask, label_components, load_image, save_image


@dataclass(frozen=True)
class SynthSpec:
    """Layout and appearance of one synthetic image.

    ``voids`` lists ``(dx, dy, r)`` disks (offsets from the ball centre) drawn in
    every ball; ``ball_voids`` maps ``(row, col)`` to a per-ball list that
    replaces it.  A void may carry a fourth element ``gaps``: that many wedges of
    its rim, the first one facing away from the ball centre, fade linearly into
    the ball over ``gap_ramp`` pixels on either side of the rim.  The outline then
    has no step edge there, so it is broken into open arcs.
    """

    grid_rows: int = 1
    grid_cols: int = 1
    ball_radius: int = 19
    pitch: int = 52
    ball_intensity: int = 90
    background_intensity: int = 140
    void_contrast: float = 7
    voids: tuple = ()
    ball_voids: dict = field(default_factory=dict)
    noise_sigma: float = 1.0
    erased_balls: tuple = ()
    seed: int = 0
    gap_width_deg: float = 60.0
    gap_ramp: int = 3

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ValueError("grid must have at least one row and column")
        if not 0 < self.ball_radius < self.pitch / 2:
            raise ValueError("ball_radius must be positive and below pitch/2")
        if self.void_contrast <= 0:
            raise ValueError("void_contrast must be positive")
        if self.gap_ramp < 1:
            raise ValueError("gap_ramp must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for idx in range(self.grid_rows * self.grid_cols):
            rc = divmod(idx, self.grid_cols)
            for v in self.voids_for(rc):
                dx, dy, r = v[:3]
                if r <= 0 or math.hypot(dx, dy) + r > self.ball_radius:
                    raise ValueError(f"void {tuple(v)} does not lie inside ball {rc}")
        for rc in self.erased_balls:
            if not (0 <= rc[0] < self.grid_rows and 0 <= rc[1] < self.grid_cols):
                raise ValueError(f"erased ball {tuple(rc)} outside the grid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid_rows * self.pitch, self.grid_cols * self.pitch

    def center(self, row: int, col: int) -> tuple[int, int]:
        return self.pitch // 2 + col * self.pitch, self.pitch // 2 + row * self.pitch

    def voids_for(self, rc) -> list:
        rc = tuple(rc)
        if rc in self.ball_voids:
            return list(self.ball_voids[rc])
        return list(self.voids)


@dataclass(frozen=True)
class TruthBall:
    index: tuple
    center: tuple
    radius: float
    erased: bool
    void_area: int
    void_percentage: float
    void_regions: int


@dataclass
class GroundTruth:
    shape: tuple
    grid: dict
    balls: list
    void_mask: np.ndarray

    def ball_void_mask(self, i: int) -> np.ndarray:
        return self.void_mask & ball_disk(self.balls[i], self.shape)

    def to_json(self, mask_name: str) -> dict:
        return {
            "shape": list(self.shape),
            "grid": self.grid,
            "void_mask": mask_name,
            "balls": [
                {
                    "index": list(b.index),
                    "center": list(b.center),
                    "radius": b.radius,
                    "erased": b.erased,
                    "void_area": b.void_area,
                    "void_pct": round(b.void_percentage, 2),
                    "void_regions": b.void_regions,
                }
                for b in self.balls
            ],
        }


def _gap_ramp(spec: SynthSpec, xx, yy, cx, cy, bx, by, r, gaps) -> np.ndarray:
    """Void contrast fraction (0..1) inside the gap wedges of one void, else 0."""
    ang = np.arctan2(yy - cy, xx - cx)
    phase = math.atan2(cy - by, cx - bx)
    half = math.radians(spec.gap_width_deg) / 2
    wedge = np.zeros(xx.shape, dtype=bool)
    for k in range(gaps):
        mid = phase + 2 * np.pi * k / gaps
        wedge |= np.abs(np.mod(ang - mid + np.pi, 2 * np.pi) - np.pi) <= half
    w = spec.gap_ramp
    d = np.hypot(xx - cx, yy - cy)
    frac = np.clip((r + w - d) / (2 * w), 0.0, 1.0)
    return np.where(wedge, frac, 0.0)


def generate(spec: SynthSpec) -> tuple[np.ndarray, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    h, w = spec.shape
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.full((h, w), float(spec.background_intensity))
    truth_mask = np.zeros((h, w), dtype=bool)
    erased = {tuple(rc) for rc in spec.erased_balls}
    balls = []
    for row in range(spec.grid_rows):
        for col in range(spec.grid_cols):
            cx, cy = spec.center(row, col)
            disk = disk_mask((h, w), (cx, cy), spec.ball_radius)
            gone = (row, col) in erased
            vmask = np.zeros((h, w), dtype=bool)
            level = np.zeros((h, w))
            if not gone:
                img[disk] = spec.ball_intensity
                for v in spec.voids_for((row, col)):
                    dx, dy, r = v[:3]
                    vd = disk_mask((h, w), (cx + dx, cy + dy), r)
                    vmask |= vd
                    frac = vd.astype(float)
                    if len(v) > 3 and v[3]:
                        ramp = _gap_ramp(spec, xx, yy, cx + dx, cy + dy, cx, cy, r, int(v[3]))
                        frac = np.where(ramp > 0, ramp, frac)
                    level = np.maximum(level, frac)
                level *= disk
                img[disk] = spec.ball_intensity + spec.void_contrast * level[disk]
            truth_mask |= vmask
            area = int(vmask.sum())
            _, k = label_components(vmask) if area else (None, 0)
            ball_area = int(disk.sum())
            balls.append(TruthBall((row, col), (float(cx), float(cy)), float(spec.ball_radius), gone,
                                   area, void_percent(area, ball_area), k))
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    grid = {"rows": spec.grid_rows, "cols": spec.grid_cols, "pitch": spec.pitch}
    return img, GroundTruth((h, w), grid, balls, truth_mask)


def save_truth(truth: GroundTruth, json_path) -> None:
    json_path = Path(json_path)
    mask_path = json_path.with_name(json_path.stem + "_mask.png")
    save_image(mask_path, truth.void_mask)
    json_path.write_text(json.dumps(truth.to_json(mask_path.name), indent=2, sort_keys=True) + "\n")


def load_truth(json_path) -> GroundTruth:
    json_path = Path(json_path)
    data = json.loads(json_path.read_text())
    mask = load_image(json_path.with_name(data["void_mask"])) > 0
    balls = [
        TruthBall(tuple(b["index"]), tuple(b["center"]), float(b["radius"]), bool(b["erased"]),
                  int(b["void_area"]), float(b["void_pct"]), int(b["void_regions"]))
        for b in data["balls"]
    ]
    return GroundTruth(tuple(data["shape"]), data["grid"], balls, mask)


def spec_from_dict(d: dict) -> SynthSpec:
    d = dict(d)
    if "voids" in d:
        d["voids"] = tuple(tuple(v) for v in d["voids"])
    if "erased_balls" in d:
        d["erased_balls"] = tuple(tuple(rc) for rc in d["erased_balls"])
    if "ball_voids" in d:
        bv = d["ball_voids"]
        if isinstance(bv, dict):
            items = bv.items()
        else:
            items = ((e["ball"], e["voids"]) for e in bv)
        d["ball_voids"] = {tuple(int(t) for t in (k.split(",") if isinstance(k, str) else k)):
                           tuple(tuple(v) for v in vs) for k, vs in items}
    return SynthSpec(**d)


def spec_to_dict(spec: SynthSpec) -> dict:
    d = asdict(spec)
    d["voids"] = [list(v) for v in spec.voids]
    d["erased_balls"] = [list(rc) for rc in spec.erased_balls]
    d["ball_voids"] = [{"ball": list(k), "voids": [list(v) for v in vs]} for k, vs in sorted(spec.ball_voids.items())]
    return d


def random_void(rng, ball_radius: int, r_range=(4, 7), gaps: int = 0) -> tuple:
    """One disk void with radius in ``r_range`` (inclusive) placed wholly inside the ball."""
    r = int(rng.integers(r_range[0], r_range[1] + 1))
    lim = ball_radius - r
    while True:
        dx, dy = (int(v) for v in rng.integers(-lim, lim + 1, 2))
        if math.hypot(dx, dy) + r <= ball_radius:
            break
    return (dx, dy, r, gaps) if gaps else (dx, dy, r)


def single_void_suite(n: int, seed: int = 0, noise_sigma: float = 1.0, r_range=(4, 7), gaps: int = 0,
                      base: SynthSpec | None = None) -> list[SynthSpec]:
    """``n`` one-ball images, each with one random void; image ``i`` uses seed ``seed + i``."""
    base = base or SynthSpec()
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed + i, 1])
        void = random_void(rng, base.ball_radius, r_range, gaps)
        out.append(replace(base, grid_rows=1, grid_cols=1, voids=(void,), ball_voids={},
                           erased_balls=(), noise_sigma=noise_sigma, seed=seed + i))
    return out


def comparison_suite(n: int = 50, seed: int = 0, noise_sigma: float = 1.5,
                     base: SynthSpec | None = None) -> list[tuple[SynthSpec, bool]]:
    """Noisy suite for the method comparison: ``(spec, broken)`` pairs.

    The first half has plain disk voids (radius 4..7); the second half has
    larger voids (radius 5..8) whose outline is broken by two ramp gaps.
    """
    plain = single_void_suite(n - n // 2, seed, noise_sigma, (4, 7), 0, base)
    broken = single_void_suite(n // 2, seed + len(plain), noise_sigma, (5, 8), 2, base)
    return [(s, False) for s in plain] + [(s, True) for s in broken]


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class ScoreCard:
    """Pixel-level agreement inside one ball disk.

    Ratios with a zero denominator are ``None`` (e.g. recall for a void-free ball).
    """

    tp: int
    fp: int
    fn: int
    iou: float | None
    precision: float | None
    recall: float | None
    area_error: float
    region_count_error: int

    def to_json(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def score_masks(pred: np.ndarray, truth: np.ndarray, disk: np.ndarray, pred_pct: float,
                truth_pct: float, pred_regions: int, truth_regions: int) -> ScoreCard:
    pred = pred & disk
    truth = truth & disk
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    return ScoreCard(tp, fp, fn, _ratio(tp, tp + fp + fn), _ratio(tp, tp + fp), _ratio(tp, tp + fn),
                     abs(pred_pct - truth_pct), pred_regions - truth_regions)


def score(report, truth: GroundTruth, ball_index: int) -> ScoreCard:
    tb = truth.balls[ball_index]
    bx, by = report.ball.center
    if math.hypot(bx - tb.center[0], by - tb.center[1]) > tb.radius / 2:
        raise ValueError(f"report ball at ({bx}, {by}) does not match truth ball {tb.index}")
    disk = ball_disk(tb, truth.shape)
    return score_masks(report.mask(truth.shape), truth.void_mask, disk, report.void_percentage,
                       tb.void_percentage, len(report.regions), tb.void_regions)


def match_balls(reports, truth: GroundTruth) -> list[tuple[int, object]]:
    """Pair each truth ball with the nearest report within half a radius."""
    out = []
    for i, tb in enumerate(truth.balls):
        best, best_d = None, tb.radius / 2
        for rep in reports:
            d = math.hypot(rep.ball.center[0] - tb.center[0], rep.ball.center[1] - tb.center[1])
            if d <= best_d:
                best, best_d = rep, d
        if best is not None:
            out.append((i, best))
    return out


def mean_of(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass
class Comparison:
    pairs: list
    proposed_recall: float | None
    baseline_recall: float | None
    ordering_holds: bool
    no_voids: bool

    def to_json(self) -> dict:
        return {
            "pairs": [{"ball": i, "proposed": p.to_json(), "baseline": b.to_json()} for i, p, b in self.pairs],
            "proposed_recall": self.proposed_recall,
            "baseline_recall": self.baseline_recall,
            "ordering_holds": self.ordering_holds,
            "no_voids": self.no_voids,
        }


def compare(truth: GroundTruth, proposed_reports, baseline_reports) -> Comparison:
    """Score both methods ball by ball and test ``proposed recall >= baseline recall``."""
    prop = dict(match_balls(proposed_reports, truth))
    base = dict(match_balls(baseline_reports, truth))
    pairs = [(i, score(prop[i], truth, i), score(base[i], truth, i)) for i in sorted(prop) if i in base]
    return summarize(pairs)


def summarize(pairs) -> Comparison:
    pr = mean_of(p.recall for _, p, _ in pairs)
    br = mean_of(b.recall for _, _, b in pairs)
    if pr is None or br is None:
        return Comparison(list(pairs), pr, br, True, True)
    return Comparison(list(pairs), pr, br, pr >= br, False)
