"""One-pass evaluation runner."""

from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence as SequenceT

from .dataset import Box, Sequence, TrackResult, ValidationConfig, read_image, validate_sequence, write_result
from .enhance import EnhanceOp
from .trackers import Tracker, make_tracker

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    parallel_workers: int = 1
    enhancement: EnhanceOp = field(default_factory=EnhanceOp)
    output_dir: Path | None = None
    seed: int = 0
    validation: ValidationConfig = field(default_factory=lambda: ValidationConfig(check_image_sizes=False))


@dataclass
class TrackResultSet:
    tracker_name: str
    results: dict[str, TrackResult]
    skipped: dict[str, str] = field(default_factory=dict)


def sequence_seed(seed: int, name: str) -> int:
    """Per-sequence seed that does not depend on scheduling order."""
    return (seed * 0x9E3779B1 + zlib.crc32(name.encode())) % 2**63


def _usable(box) -> bool:
    if not isinstance(box, Box):
        return False
    vals = box.as_tuple()
    return all(math.isfinite(v) for v in vals) and box.w > 0 and box.h > 0


def run_sequence(tracker: Tracker, seq: Sequence, config: RunConfig | None = None, images=None) -> TrackResult:
    """Run ``tracker`` once through ``seq``.

    Frame 1 is the init box verbatim. A non-finite or non-positive-size output
    is replaced by the previous frame's box and recorded as a warning.
    ``images`` may supply decoded frames aligned with ``seq.frames``.
    """
    cfg = config or RunConfig()
    init = seq.frames[0].gt
    if init is None:
        raise ValueError(f"{seq.name}: first frame has no ground-truth box")
    frames = iter(images) if images is not None else (read_image(f.image_path) for f in seq.frames)
    enhance = cfg.enhancement

    tracker.init(enhance(next(frames)), init)
    boxes = [init]
    warnings = []
    for f, img in zip(seq.frames[1:], frames):
        box = tracker.update(enhance(img))
        if not _usable(box):
            msg = f"tracker emitted unusable box {box!r}; holding previous box"
            log.warning("%s frame %d: %s", seq.name, f.index, msg)
            warnings.append((f.index, msg))
            box = boxes[-1]
        boxes.append(Box(*(float(v) for v in box.as_tuple())))
    if len(boxes) != len(seq.frames):
        raise ValueError(f"{seq.name}: ran {len(boxes)} frames of {len(seq.frames)}")
    return TrackResult(sequence_name=seq.name, boxes=boxes, warnings=warnings)


def _run_one(args):
    factory, seq, cfg = args
    tracker = factory(sequence_seed(cfg.seed, seq.name))
    return run_sequence(tracker, seq, cfg)


class TrackerFactory:
    """Picklable ``seed -> Tracker`` constructor for worker processes."""

    def __init__(self, name: str, **options):
        self.name = name
        self.options = options
        make_tracker(name, **options)  # fail fast on bad options

    def __call__(self, seed: int) -> Tracker:
        return make_tracker(self.name, seed=seed, **self.options)


def run_benchmark(
    tracker: TrackerFactory | Callable[[int], Tracker],
    dataset: SequenceT[Sequence],
    config: RunConfig | None = None,
    tracker_name: str | None = None,
) -> TrackResultSet:
    """Run a fresh tracker per sequence and write
    ``<output_dir>/<tracker_name>/<sequence>.txt`` when an output dir is set.

    Sequences failing validation are skipped and logged.
    """
    cfg = config or RunConfig()
    name = tracker_name or getattr(tracker, "name", "tracker")
    todo, skipped = [], {}
    for seq in sorted(dataset, key=lambda s: s.name):
        rep = validate_sequence(seq, cfg.validation)
        if rep.errors:
            msg = "; ".join(f"frame {i}: {m}" for i, m in rep.errors)
            log.error("skipping %s: %s", seq.name, msg)
            skipped[seq.name] = msg
        else:
            todo.append(seq)

    jobs = [(tracker, s, cfg) for s in todo]
    if cfg.parallel_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel_workers) as pool:
            outs = list(pool.map(_run_one, jobs))
    else:
        outs = [_run_one(j) for j in jobs]
    results = {r.sequence_name: r for r in outs}

    if cfg.output_dir is not None:
        out = Path(cfg.output_dir) / name
        for seq_name in sorted(results):
            write_result(out, results[seq_name])
    return TrackResultSet(tracker_name=name, results=results, skipped=skipped)
