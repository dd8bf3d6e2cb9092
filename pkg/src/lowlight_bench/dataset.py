"""On-disk sequence format, loading and validation.

A sequence directory looks like::

    <name>/
      img/00000001.png ...        # 1-based, .jpg or .png
      groundtruth_rect.txt        # one "x,y,w,h" line per frame
      visibility.txt              # optional, one of 0/1/2/3 per frame
      attributes.txt              # optional, 12 space-separated 0/1 flags

Absent-target frames (FOC, OV) carry a ``0,0,0,0`` placeholder in the GT file.
Coordinates are 0-based with a top-left origin.
"""

from __future__ import annotations

import enum
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence as SequenceT

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

ATTRIBUTE_NAMES = ("IV", "SV", "MB", "OV", "POC", "ROT", "FOC", "VC", "SOB", "ARC", "LR", "LAI")
MANUAL_ATTRIBUTES = frozenset({"IV", "OV", "POC", "ROT", "FOC", "VC", "MB", "SOB"})
COMPUTED_ATTRIBUTES = frozenset({"SV", "ARC", "LR", "LAI"})

GT_FILE = "groundtruth_rect.txt"
VISIBILITY_FILE = "visibility.txt"
ATTRIBUTE_FILE = "attributes.txt"
IMAGE_DIR = "img"
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")

_SPLIT = re.compile(r"[,\s]+")


class DatasetError(ValueError):
    """Malformed sequence or result data."""


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def is_valid(self) -> bool:
        vals = (self.x, self.y, self.w, self.h)
        return all(math.isfinite(v) for v in vals) and self.w > 0 and self.h > 0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def close_to(self, other: "Box", tol: float = 1e-6) -> bool:
        return all(abs(a - b) <= tol for a, b in zip(self.as_tuple(), other.as_tuple()))


class Visibility(enum.IntEnum):
    VISIBLE = 0
    POC = 1
    FOC = 2
    OV = 3

    @property
    def has_box(self) -> bool:
        return self in (Visibility.VISIBLE, Visibility.POC)


@dataclass(frozen=True)
class Frame:
    index: int
    image_path: Path
    visibility: Visibility
    gt: Box | None


@dataclass(frozen=True)
class Sequence:
    name: str
    frames: tuple[Frame, ...]
    manual_attributes: frozenset[str]
    image_size: tuple[int, int]
    path: Path | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def init_box(self) -> Box:
        return self.frames[0].gt

    def boxed_frames(self) -> list[Frame]:
        return [f for f in self.frames if f.gt is not None]


@dataclass
class TrackResult:
    sequence_name: str
    boxes: list[Box]
    warnings: list[tuple[int, str]] = field(default_factory=list, compare=False)

    def as_array(self) -> np.ndarray:
        return np.array([b.as_tuple() for b in self.boxes], dtype=np.float64).reshape(-1, 4)


@dataclass
class ValidationConfig:
    max_box_fraction: float = 0.5
    min_length: int = 30
    check_image_sizes: bool = True


@dataclass
class ValidationReport:
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class DatasetStats:
    n_sequences: int
    n_frames: int
    visibility_counts: dict[str, int]
    mean_lai: float
    n_lai_frames: int


# --------------------------------------------------------------------------
# parsing / formatting
# --------------------------------------------------------------------------


def parse_box_line(line: str, where: str = "") -> Box:
    parts = [p for p in _SPLIT.split(line.strip()) if p]
    if len(parts) != 4:
        raise DatasetError(f"malformed line{where}: expected 4 values, got {line.strip()!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise DatasetError(f"malformed line{where}: {line.strip()!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise DatasetError(f"malformed line{where}: non-finite value in {line.strip()!r}")
    return Box(*vals)


def format_box(box: Box | None) -> str:
    if box is None:
        return "0,0,0,0"
    return ",".join(_fmt_coord(v) for v in box.as_tuple())


def _fmt_coord(v: float) -> str:
    # shortest repr that round-trips; integers print without a trailing ".0"
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _read_lines(path: Path) -> list[str]:
    with open(path) as fh:
        return [ln for ln in (raw.strip() for raw in fh) if ln]


def read_boxes(path: Path) -> list[Box]:
    return [parse_box_line(ln, f" {i} of {path.name}") for i, ln in enumerate(_read_lines(path), 1)]


def write_boxes(path: Path, boxes: Iterable[Box | None]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for b in boxes:
            fh.write(format_box(b) + "\n")


def list_frames(img_dir: Path) -> list[Path]:
    if not img_dir.is_dir():
        raise DatasetError(f"missing image directory {img_dir}")
    return sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_image(path: Path) -> np.ndarray:
    """Decode an 8-bit frame as an ``H x W x 3`` uint8 array."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8).copy()


def write_image(path: Path, image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, optimize=False)


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        return im.size


# --------------------------------------------------------------------------
# sequences
# --------------------------------------------------------------------------


def load_sequence(seq_dir: str | Path) -> Sequence:
    seq_dir = Path(seq_dir)
    images = list_frames(seq_dir / IMAGE_DIR)
    gt_path = seq_dir / GT_FILE
    if not gt_path.is_file():
        raise DatasetError(f"{seq_dir.name}: missing GT file {GT_FILE}")
    gt_lines = _read_lines(gt_path)
    if len(gt_lines) != len(images):
        raise DatasetError(
            f"{seq_dir.name}: GT line count mismatch ({len(gt_lines)} lines, {len(images)} frames)"
        )

    vis_path = seq_dir / VISIBILITY_FILE
    if vis_path.is_file():
        vis_lines = _read_lines(vis_path)
        if len(vis_lines) != len(images):
            raise DatasetError(
                f"{seq_dir.name}: visibility line count mismatch "
                f"({len(vis_lines)} lines, {len(images)} frames)"
            )
        try:
            vis = [Visibility(int(v)) for v in vis_lines]
        except ValueError:
            raise DatasetError(f"{seq_dir.name}: malformed {VISIBILITY_FILE}") from None
    else:
        vis = [Visibility.VISIBLE] * len(images)

    frames = []
    for i, (img, line, v) in enumerate(zip(images, gt_lines, vis), 1):
        box = parse_box_line(line, f" {i} of {seq_dir.name}/{GT_FILE}")
        if v.has_box:
            if not (box.w > 0 and box.h > 0):
                raise DatasetError(f"{seq_dir.name}: frame {i} has non-positive box size")
            gt = box
        else:
            gt = None
        frames.append(Frame(index=i, image_path=img, visibility=v, gt=gt))

    if not frames:
        raise DatasetError(f"{seq_dir.name}: no frames")
    if frames[0].visibility != Visibility.VISIBLE:
        raise DatasetError(f"{seq_dir.name}: first frame not Visible")

    manual = frozenset()
    attr_path = seq_dir / ATTRIBUTE_FILE
    if attr_path.is_file():
        manual = _read_manual_attributes(attr_path)

    return Sequence(
        name=seq_dir.name,
        frames=tuple(frames),
        manual_attributes=manual,
        image_size=_image_size(images[0]),
        path=seq_dir,
    )


def _read_manual_attributes(path: Path) -> frozenset[str]:
    tokens = " ".join(_read_lines(path)).split()
    if len(tokens) != len(ATTRIBUTE_NAMES) or any(t not in ("0", "1") for t in tokens):
        raise DatasetError(f"{path}: expected {len(ATTRIBUTE_NAMES)} 0/1 flags")
    return frozenset(n for n, t in zip(ATTRIBUTE_NAMES, tokens) if t == "1" and n in MANUAL_ATTRIBUTES)


def write_attribute_flags(path: Path, names: Iterable[str]) -> None:
    names = set(names)
    with open(path, "w") as fh:
        fh.write(" ".join("1" if n in names else "0" for n in ATTRIBUTE_NAMES) + "\n")


def write_annotations(seq: Sequence, seq_dir: str | Path) -> None:
    """Write GT, visibility and manual attribute files for ``seq``."""
    seq_dir = Path(seq_dir)
    write_boxes(seq_dir / GT_FILE, (f.gt for f in seq.frames))
    with open(seq_dir / VISIBILITY_FILE, "w") as fh:
        for f in seq.frames:
            fh.write(f"{int(f.visibility)}\n")
    write_attribute_flags(seq_dir / ATTRIBUTE_FILE, seq.manual_attributes)


def is_sequence_dir(path: Path) -> bool:
    return (path / GT_FILE).is_file() or (path / IMAGE_DIR).is_dir()


def load_dataset(root: str | Path, strict: bool = False) -> tuple[list[Sequence], dict[str, str]]:
    """Load every sequence directory under ``root``.

    Returns the loaded sequences (sorted by name) and a map of sequence name
    to load error for directories that failed. With ``strict`` the first
    failure raises instead.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    dirs = [root] if is_sequence_dir(root) else sorted(p for p in root.iterdir() if p.is_dir() and is_sequence_dir(p))
    seqs, failed = [], {}
    for d in dirs:
        try:
            seqs.append(load_sequence(d))
        except DatasetError as exc:
            if strict:
                raise
            log.error("skipping %s: %s", d.name, exc)
            failed[d.name] = str(exc)
    return seqs, failed


def validate_sequence(seq: Sequence, config: ValidationConfig | None = None) -> ValidationReport:
    cfg = config or ValidationConfig()
    rep = ValidationReport()
    if len(seq.frames) < 2:
        rep.errors.append((0, f"sequence has {len(seq.frames)} frame(s), need at least 2"))
    if seq.frames and seq.frames[0].visibility != Visibility.VISIBLE:
        rep.errors.append((1, "first frame not Visible"))

    W, H = seq.image_size
    image_area = float(W * H)
    prev = 0
    for f in seq.frames:
        if f.index <= prev:
            rep.errors.append((f.index, "frame index not strictly increasing"))
        prev = f.index
        if f.visibility.has_box and f.gt is None:
            rep.errors.append((f.index, f"{f.visibility.name} frame has no box"))
        if not f.visibility.has_box and f.gt is not None:
            rep.errors.append((f.index, f"{f.visibility.name} frame carries a box"))
        if f.gt is None:
            continue
        if not f.gt.is_valid():
            rep.errors.append((f.index, "box has non-positive size"))
            continue
        frac = f.gt.area / image_area
        if frac > cfg.max_box_fraction:
            rep.warnings.append((f.index, f"box occupies {frac:.2f} of image"))

    if cfg.check_image_sizes:
        for f in seq.frames:
            if not Path(f.image_path).is_file():
                rep.errors.append((f.index, f"image file missing: {f.image_path}"))
            elif _image_size(f.image_path) != seq.image_size:
                rep.errors.append((f.index, "image size differs from first frame"))

    if len(seq.frames) < cfg.min_length:
        rep.warnings.append((0, f"length below {cfg.min_length}"))
    return rep


# --------------------------------------------------------------------------
# tracker results
# --------------------------------------------------------------------------


def load_result_file(path: Path, seq: Sequence) -> TrackResult:
    boxes = read_boxes(path)
    if len(boxes) != len(seq.frames):
        raise DatasetError(
            f"{seq.name}: result count mismatch ({len(boxes)} boxes, {len(seq.frames)} frames)"
        )
    if not boxes[0].close_to(seq.init_box, 1e-6):
        raise DatasetError(f"{seq.name}: OPE init violated (first box {boxes[0]} != {seq.init_box})")
    return TrackResult(sequence_name=seq.name, boxes=boxes)


def load_results(results_dir: str | Path, dataset: SequenceT[Sequence]) -> dict[str, TrackResult]:
    results_dir = Path(results_dir)
    out = {}
    for seq in dataset:
        path = results_dir / f"{seq.name}.txt"
        if not path.is_file():
            raise DatasetError(f"{seq.name}: missing result file {path}")
        out[seq.name] = load_result_file(path, seq)
    return out


def write_result(results_dir: str | Path, result: TrackResult) -> Path:
    path = Path(results_dir) / f"{result.sequence_name}.txt"
    write_boxes(path, result.boxes)
    return path


# --------------------------------------------------------------------------
# dataset-level statistics
# --------------------------------------------------------------------------


def dataset_stats(dataset: SequenceT[Sequence], expand: float = 1.0) -> DatasetStats:
    """Counts plus the mean of per-frame LAI values over all boxed frames."""
    from .attributes import lai_value

    if not dataset:
        raise DatasetError("empty dataset")
    counts = {v.name: 0 for v in Visibility}
    lai = []
    n_frames = 0
    for seq in dataset:
        for f in seq.frames:
            n_frames += 1
            counts[f.visibility.name] += 1
            if f.gt is not None:
                lai.append(lai_value(read_image(f.image_path), f.gt, expand))
    return DatasetStats(
        n_sequences=len(dataset),
        n_frames=n_frames,
        visibility_counts=counts,
        mean_lai=math.fsum(lai) / len(lai) if lai else float("nan"),
        n_lai_frames=len(lai),
    )
