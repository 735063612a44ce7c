"""Run configuration: every parameter bundle in one validated object.

Config files are JSON objects whose sections mirror the parameter
dataclasses.  Unknown keys anywhere are errors, reported by dotted name.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

from .assemble import AssemblyParams
from .baseline import BaselineParams
from .pipeline import BASELINE, METHODS, PROPOSED, DetectionParams
from .scan import ScanParams
from .segment import SegmentationParams
from .synth import SynthSpec, spec_from_dict, spec_to_dict

JOBS_ENV = "VOIDINSPECT_JOBS"
METHOD_CHOICES = (PROPOSED, BASELINE, "both")
SUITES = ("single", "low_contrast", "comparison")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    detection: DetectionParams = field(default_factory=DetectionParams)
    baseline: BaselineParams = field(default_factory=BaselineParams)
    synth: SynthSpec = field(default_factory=SynthSpec)
    suite: str = "single"
    count: int = 1
    method: str = PROPOSED
    out: str = "out"
    overlay: bool = False
    dump_edges: bool = False
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHOD_CHOICES:
            raise ConfigError(f"method: expected one of {', '.join(METHOD_CHOICES)}, got {self.method!r}")
        if self.suite not in SUITES:
            raise ConfigError(f"suite: expected one of {', '.join(SUITES)}, got {self.suite!r}")
        if not isinstance(self.count, int) or self.count < 1:
            raise ConfigError("count: must be a positive integer")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError("jobs: must be a positive integer")

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)

    def params_dict(self) -> dict:
        """The parameters that determine detection output."""
        d = self.detection
        return {
            "segmentation": dataclasses.asdict(self.segmentation),
            "detection": {"sigma": d.sigma, "min_slope": d.min_slope},
            "scan": dataclasses.asdict(d.scan),
            "assembly": dataclasses.asdict(d.assembly),
            "baseline": dataclasses.asdict(self.baseline),
        }

    def params_hash(self) -> str:
        blob = json.dumps(self.params_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = self.params_dict()
        d["synth"] = spec_to_dict(self.synth)
        for k in ("suite", "count", "method", "out", "overlay", "dump_edges", "jobs", "seed"):
            d[k] = getattr(self, k)
        return d


def _build(cls, data, section: str, extra=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    known = {f.name for f in fields(cls)} - set(extra or ())
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key: {section}.{key}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}: {e}") from None


_TOP = {"segmentation", "detection", "scan", "assembly", "baseline", "synth", "suite", "count", "method",
        "out", "overlay", "dump_edges", "jobs", "seed"}


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for key in data:
        if key not in _TOP:
            raise ConfigError(f"unknown config key: {key}")
    scan = _build(ScanParams, data.get("scan", {}), "scan")
    assembly = _build(AssemblyParams, data.get("assembly", {}), "assembly")
    det = dict(data.get("detection", {}))
    detection = _build(DetectionParams, det, "detection", extra=("scan", "assembly"))
    detection = dataclasses.replace(detection, scan=scan, assembly=assembly)
    synth = data.get("synth", {})
    if not isinstance(synth, dict):
        raise ConfigError("synth: expected an object")
    known = {f.name for f in fields(SynthSpec)}
    for key in synth:
        if key not in known:
            raise ConfigError(f"unknown config key: synth.{key}")
    try:
        spec = spec_from_dict(synth)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"synth: {e}") from None
    top = {k: data[k] for k in ("suite", "count", "method", "out", "overlay", "dump_edges", "jobs", "seed") if k in data}
    for k in ("overlay", "dump_edges"):
        if k in top and not isinstance(top[k], bool):
            raise ConfigError(f"{k}: expected true or false")
    if "seed" in top and not isinstance(top["seed"], int):
        raise ConfigError("seed: expected an integer")
    return RunConfig(
        segmentation=_build(SegmentationParams, data.get("segmentation", {}), "segmentation"),
        detection=detection,
        baseline=_build(BaselineParams, data.get("baseline", {}), "baseline"),
        synth=spec,
        **top,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e.msg} (line {e.lineno})") from None
    return config_from_dict(data)


def resolve_jobs(flag: int | None, configured: int) -> int:
    """``--jobs`` wins, then ``$VOIDINSPECT_JOBS``, then the config file."""
    if flag is not None:
        if flag < 1:
            raise ConfigError("--jobs must be >= 1")
        return flag
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{JOBS_ENV} must be >= 1")
        return n
    return configured
