"""Command-line front end: ``voidinspect inspect|synth|eval|compare``.

Exit codes: 0 success, 1 some input failed to process, 2 usage or config error.
Outputs depend only on inputs and configuration; ``--jobs`` changes speed,
never bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from skimage.draw import circle_perimeter

from .assemble import ball_disk
from .config import ConfigError, RunConfig, load_config, resolve_jobs
from .pipeline import BASELINE, METHODS, PROPOSED, prepare_ball, run_methods
from .raster import crop_ball, crop_origin, load_image, save_image
from .segment import INTERPOLATED, segment_balls
from .synth import (ScoreCard, comparison_suite, generate, load_truth, mean_of, save_truth, score_masks,
                    single_void_suite, spec_to_dict, summarize)

log = logging.getLogger("voidinspect")

IMAGE_SUFFIXES = {".png", ".pgm", ".tif", ".tiff", ".bmp", ".jpg", ".jpeg"}
TRUTH_SUFFIX = ".truth.json"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Inputs and parallel execution


def collect_inputs(paths, suffixes=IMAGE_SUFFIXES) -> list[Path]:
    """Files named directly plus matching files inside named directories, sorted per directory."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(f for f in p.iterdir() if f.is_file() and _has_suffix(f, suffixes)))
        else:
            out.append(p)
    return out


def _has_suffix(path: Path, suffixes) -> bool:
    name = path.name.lower()
    if name.endswith("_mask.png"):
        return False
    return any(name.endswith(s) for s in suffixes)


def run_tasks(fn, items, jobs: int) -> list:
    """``[fn(x) for x in items]``, spread over ``jobs`` processes; order is preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------------------
# Inspection


@dataclass
class ImageResult:
    path: Path
    shape: tuple = ()
    balls: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)  # method -> [InspectionReport], ball order
    edges: np.ndarray | None = None
    image: np.ndarray | None = None
    error: str | None = None


def _segment_task(args):
    path, cfg = args
    try:
        img = load_image(path)
        return img, segment_balls(img, cfg.segmentation), None
    except Exception as e:  # reported per file, the run continues
        return None, [], f"{type(e).__name__}: {e}"


def _ball_task(args):
    crop, ball, methods, cfg, want_edges = args
    try:
        work = prepare_ball(crop, ball, cfg.detection)
        reports = run_methods(work, ball, methods, cfg.detection, cfg.baseline)
        edges = work.edges.mask if want_edges else None
        return reports, edges, None
    except Exception as e:
        return None, None, f"{type(e).__name__}: {e}"


def run_inspection(paths, cfg: RunConfig, methods, jobs: int, want_edges: bool = False) -> list[ImageResult]:
    """Segment every image, then inspect every ball; both stages run in parallel."""
    segmented = run_tasks(_segment_task, [(p, cfg) for p in paths], jobs)
    results = []
    tasks, owners = [], []
    for path, (img, balls, err) in zip(paths, segmented):
        res = ImageResult(Path(path), error=err)
        if img is not None:
            res.shape, res.balls, res.image = img.shape, balls, img
            res.reports = {m: [] for m in methods}
            if want_edges:
                res.edges = np.zeros(img.shape, dtype=bool)
            for b in balls:
                tasks.append((crop_ball(img, b), b, tuple(methods), cfg, want_edges))
                owners.append((res, b))
        results.append(res)
    for (res, b), (reports, edges, err) in zip(owners, run_tasks(_ball_task, tasks, jobs)):
        if err is not None:
            res.error = res.error or f"ball at {b.center}: {err}"
            continue
        for m in methods:
            res.reports[m].append(reports[m])
        if edges is not None:
            _paste(res.edges, edges, crop_origin(b))
    for res in results:
        if res.error is not None:
            res.reports = {}
    return results


def _paste(dst: np.ndarray, src: np.ndarray, origin) -> None:
    x0, y0 = origin
    h, w = dst.shape
    ys, xs = np.nonzero(src)
    xs, ys = xs + x0, ys + y0
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    dst[ys[ok], xs[ok]] = True


def report_json(res: ImageResult, method: str, cfg: RunConfig, mask_name: str) -> dict:
    balls = []
    for i, rep in enumerate(res.reports[method]):
        x0, y0 = rep.origin
        b = rep.ball
        balls.append({
            "index": i,
            "center": [round(float(b.center[0]), 3), round(float(b.center[1]), 3)],
            "radius": round(float(b.radius), 3),
            "provenance": b.provenance,
            "ball_area": rep.ball_area,
            "regions": [
                {
                    "label": reg.label,
                    "area": reg.area,
                    "centroid": [round(reg.centroid[0] + x0, 3), round(reg.centroid[1] + y0, 3)],
                    "bbox": [reg.bbox[0] + x0, reg.bbox[1] + y0, reg.bbox[2] + x0, reg.bbox[3] + y0],
                }
                for reg in rep.regions
            ],
            "void_area": rep.total_void_area,
            "void_pct": round(rep.void_percentage, 2),
        })
    return {"image": res.path.name, "method": method, "params_hash": cfg.params_hash(), "mask": mask_name,
            "balls": balls}


def result_mask(res: ImageResult, method: str) -> np.ndarray:
    mask = np.zeros(res.shape, dtype=bool)
    for rep in res.reports[method]:
        mask |= rep.mask(res.shape)
    return mask


def render_overlay(img: np.ndarray, reports) -> Image.Image:
    """Grey image with void pixels tinted red, ball circles and void percentages drawn."""
    rgb = np.repeat(img[:, :, None], 3, axis=2).astype(np.float64)
    h, w = img.shape
    for rep in reports:
        m = rep.mask((h, w))
        rgb[m] = rgb[m] * 0.4 + np.array([255.0, 0.0, 0.0]) * 0.6
    for rep in reports:
        b = rep.ball
        colour = (255, 200, 0) if b.provenance == INTERPOLATED else (0, 220, 0)
        rr, cc = circle_perimeter(int(round(b.center[1])), int(round(b.center[0])), int(round(b.radius)),
                                  shape=(h, w))
        rgb[rr, cc] = colour
    out = Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), mode="RGB")
    draw = ImageDraw.Draw(out)
    for rep in reports:
        b = rep.ball
        draw.text((b.center[0] - b.radius, max(b.center[1] - b.radius - 11, 0)), f"{rep.void_percentage:.2f}",
                  fill=(255, 255, 0))
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    path.write_text(buf.getvalue())


def _report_failures(results) -> int:
    failed = [r for r in results if r.error is not None]
    for r in failed:
        print(f"error: {r.path}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_inspect(paths, cfg: RunConfig, jobs: int) -> int:
    inputs = collect_inputs(paths)
    if not inputs:
        raise UsageError("no inputs")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_inspection(inputs, cfg, cfg.methods, jobs, want_edges=cfg.dump_edges)
    rows = []
    for res in results:
        if res.error is not None:
            continue
        stem = res.path.stem
        for m in cfg.methods:
            mask_name = f"{stem}.{m}.mask.png"
            save_image(out / mask_name, result_mask(res, m))
            _write_json(out / f"{stem}.{m}.json", report_json(res, m, cfg, mask_name))
            if cfg.overlay:
                render_overlay(res.image, res.reports[m]).save(out / f"{stem}.{m}.overlay.png")
            for i, rep in enumerate(res.reports[m]):
                rows.append([res.path.name, i, rep.ball.provenance, f"{rep.void_percentage:.2f}",
                             len(rep.regions), m])
        if cfg.dump_edges:
            save_image(out / f"{stem}.edges.png", res.edges)
    _write_csv(out / "summary.csv", ["image", "ball_index", "provenance", "void_pct", "region_count", "method"], rows)
    done = sum(r.error is None for r in results)
    print(f"inspected {done}/{len(results)} images -> {out}")
    return _report_failures(results)


# ---------------------------------------------------------------------------
# Synthetic suites


def suite_specs(cfg: RunConfig) -> list[tuple]:
    """``(spec, broken)`` for every image the config describes."""
    base, n, seed = cfg.synth, cfg.count, cfg.seed
    if cfg.suite == "low_contrast":
        return [(s, False) for s in single_void_suite(n, seed, base.noise_sigma, base=base)]
    if cfg.suite == "comparison":
        return comparison_suite(n, seed, base.noise_sigma, base=base)
    return [(replace(base, seed=seed + i), False) for i in range(n)]


def _synth_task(args):
    i, spec, broken, out = args
    img, truth = generate(spec)
    name = f"synth_{i:04d}"
    save_image(out / f"{name}.png", img)
    save_truth(truth, out / f"{name}{TRUTH_SUFFIX}")
    return {"image": f"{name}.png", "truth": f"{name}{TRUTH_SUFFIX}", "broken_contours": broken,
            "spec": spec_to_dict(spec)}


def cmd_synth(cfg: RunConfig, jobs: int) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = suite_specs(cfg)
    entries = run_tasks(_synth_task, [(i, s, b, out) for i, (s, b) in enumerate(specs)], jobs)
    _write_json(out / "suite.json", {"suite": cfg.suite, "seed": cfg.seed, "images": entries})
    print(f"wrote {len(entries)} synthetic images -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class _Ball:
    center: tuple
    radius: float


def _match(report_balls, tb):
    best, best_d = None, tb.radius / 2
    for b in report_balls:
        d = float(np.hypot(b["center"][0] - tb.center[0], b["center"][1] - tb.center[1]))
        if d <= best_d:
            best, best_d = b, d
    return best


def score_report(report: dict, pred_mask: np.ndarray, truth) -> list[tuple[int, ScoreCard]]:
    """Score every truth ball; a ball the report missed counts as an empty prediction."""
    if pred_mask.shape != tuple(truth.shape):
        raise ValueError(f"mask shape {pred_mask.shape} does not match truth {tuple(truth.shape)}")
    out = []
    for i, tb in enumerate(truth.balls):
        disk = ball_disk(tb, truth.shape)
        rb = _match(report["balls"], tb)
        if rb is None:
            pred, pct, nreg = np.zeros_like(pred_mask), 0.0, 0
        else:
            pred = pred_mask & ball_disk(_Ball(tuple(rb["center"]), rb["radius"]), truth.shape)
            pct, nreg = rb["void_pct"], len(rb["regions"])
        out.append((i, score_masks(pred, truth.void_mask, disk, pct, tb.void_percentage, nreg, tb.void_regions)))
    return out


def _card_json(card: ScoreCard) -> dict:
    d = card.to_json()
    return {k: (round(v, 6) if isinstance(v, float) else v) for k, v in d.items()}


def _mean(values):
    m = mean_of(values)
    return None if m is None else round(m, 6)


def cmd_eval(paths, truth_dir, cfg: RunConfig) -> int:
    reports = collect_inputs(paths, suffixes={".json"})
    reports = [p for p in reports if not p.name.endswith(TRUTH_SUFFIX) and p.name not in ("suite.json",)]
    if not reports:
        raise UsageError("no inputs")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    images, cards, rows, failed = [], [], [], 0
    for path in reports:
        try:
            report = json.loads(path.read_text())
            tdir = Path(truth_dir) if truth_dir else path.parent
            truth = load_truth(tdir / (Path(report["image"]).stem + TRUTH_SUFFIX))
            pred = load_image(path.parent / report["mask"]) > 0
            scored = score_report(report, pred, truth)
        except Exception as e:
            print(f"error: {path}: {type(e).__name__}: {e}", file=sys.stderr)
            failed += 1
            continue
        images.append({"report": path.name, "image": report["image"], "method": report["method"],
                       "balls": [{"ball": i, **_card_json(c)} for i, c in scored]})
        for i, c in scored:
            cards.append(c)
            rows.append([report["image"], report["method"], i, c.tp, c.fp, c.fn,
                         "" if c.iou is None else f"{c.iou:.6f}",
                         "" if c.recall is None else f"{c.recall:.6f}", f"{c.area_error:.4f}"])
    summary = {
        "images": images,
        "mean_iou": _mean(c.iou for c in cards),
        "mean_precision": _mean(c.precision for c in cards),
        "mean_recall": _mean(c.recall for c in cards),
        "mean_area_error": _mean(c.area_error for c in cards),
    }
    _write_json(out / "eval.json", summary)
    _write_csv(out / "eval.csv", ["image", "method", "ball_index", "tp", "fp", "fn", "iou", "recall", "area_error"], rows)
    print(f"scored {len(images)} reports: mean IoU {summary['mean_iou']}, mean recall {summary['mean_recall']}")
    return 1 if failed else 0


def cmd_compare(paths, cfg: RunConfig, jobs: int) -> int:
    inputs = collect_inputs(paths)
    if not inputs:
        raise UsageError("no inputs")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_inspection(inputs, cfg, METHODS, jobs)
    images, pairs = [], []
    for res in results:
        if res.error is not None:
            continue
        try:
            truth = load_truth(res.path.with_name(res.path.stem + TRUTH_SUFFIX))
            report = {m: report_json(res, m, cfg, "") for m in METHODS}
            scored = {m: dict(score_report(report[m], result_mask(res, m), truth)) for m in METHODS}
        except Exception as e:
            res.error = f"{type(e).__name__}: {e}"
            continue
        mine = [(i, scored[PROPOSED][i], scored[BASELINE][i]) for i in sorted(scored[PROPOSED])]
        pairs.extend(mine)
        images.append({"image": res.path.name,
                       "pairs": [{"ball": i, PROPOSED: _card_json(p), BASELINE: _card_json(b)} for i, p, b in mine]})
    comp = summarize(pairs)
    data = {
        "images": images,
        "proposed_recall": None if comp.proposed_recall is None else round(comp.proposed_recall, 6),
        "baseline_recall": None if comp.baseline_recall is None else round(comp.baseline_recall, 6),
        "ordering_holds": comp.ordering_holds,
        "no_voids": comp.no_voids,
    }
    _write_json(out / "comparison.json", data)
    print(f"proposed_recall={data['proposed_recall']} baseline_recall={data['baseline_recall']} "
          f"ordering_holds={data['ordering_holds']}")
    return _report_failures(results)


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes (default: $VOIDINSPECT_JOBS or config)")
    common.add_argument("--seed", type=int, help="base seed for synthetic suites")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="voidinspect", description="BGA void detection by ring scanning")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("inspect", parents=[common], help="detect voids in X-ray images")
    p.add_argument("inputs", nargs="*", help="image files or directories")
    p.add_argument("--method", choices=("proposed", "baseline", "both"))
    p.add_argument("--overlay", action="store_true", help="write overlay PNGs")
    p.add_argument("--dump-edges", action="store_true", help="write LoG edge masks")
    sub.add_parser("synth", parents=[common], help="generate synthetic images with ground truth")
    p = sub.add_parser("eval", parents=[common], help="score reports against ground truth")
    p.add_argument("inputs", nargs="*", help="report JSON files or directories")
    p.add_argument("--truth", help="directory holding *.truth.json (default: next to each report)")
    p = sub.add_parser("compare", parents=[common], help="compare proposed and baseline recall")
    p.add_argument("inputs", nargs="*", help="synthetic images with *.truth.json alongside")
    return parser


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    over = {}
    if args.out is not None:
        over["out"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "method", None) is not None:
        over["method"] = args.method
    if getattr(args, "overlay", False):
        over["overlay"] = True
    if getattr(args, "dump_edges", False):
        over["dump_edges"] = True
    return replace(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_flags(cfg, args)
        jobs = resolve_jobs(args.jobs, cfg.jobs)
        if args.command == "inspect":
            return cmd_inspect(args.inputs, cfg, jobs)
        if args.command == "synth":
            return cmd_synth(cfg, jobs)
        if args.command == "eval":
            return cmd_eval(args.inputs, args.truth, cfg)
        return cmd_compare(args.inputs, cfg, jobs)
    except (ConfigError, UsageError) as e:
        print(f"voidinspect: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
