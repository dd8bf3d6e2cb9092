"""Annotation-derived challenge attributes (SV, ARC, LR, LAI) and the
attribute co-occurrence matrix.

Threshold rules compare strictly outward: a ratio of exactly 0.5 or 2.0 is
inside the allowed range, an area of exactly 1000 px is not low-resolution,
and a local intensity of exactly 20 is not low-light.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dataset import (
    ATTRIBUTE_NAMES,
    MANUAL_ATTRIBUTES,
    Box,
    Sequence,
    read_image,
)

# BT.601 luma weights, scaled to integers so constant images come back exact.
LUMA_WEIGHTS = (299, 587, 114)
LUMA_SCALE = 1000


@dataclass
class AttributeConfig:
    ratio_low: float = 0.5
    ratio_high: float = 2.0
    lr_area: float = 1000.0
    lai_threshold: float = 20.0
    lai_expand: float = 1.0
    lr_fraction: float = 0.5
    lai_fraction: float = 0.5


@dataclass(frozen=True)
class FrameAttributeFlags:
    index: int
    sv: bool
    arc: bool
    lr: bool
    lai: bool
    lai_value: float
    area_ratio: float
    aspect_ratio_change: float


@dataclass(frozen=True)
class AttributeSet:
    names: frozenset[str]

    def __post_init__(self):
        unknown = set(self.names) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown attributes: {sorted(unknown)}")

    def __contains__(self, name: str) -> bool:
        return name in self.names

    @property
    def flags(self) -> tuple[bool, ...]:
        return tuple(n in self.names for n in ATTRIBUTE_NAMES)

    @classmethod
    def from_flags(cls, flags: Iterable[bool]) -> "AttributeSet":
        flags = list(flags)
        if len(flags) != len(ATTRIBUTE_NAMES):
            raise ValueError(f"expected {len(ATTRIBUTE_NAMES)} flags, got {len(flags)}")
        return cls(frozenset(n for n, f in zip(ATTRIBUTE_NAMES, flags) if f))

    def format(self) -> str:
        return " ".join("1" if f else "0" for f in self.flags)


def luma(image: np.ndarray) -> np.ndarray:
    """Float BT.601 luma of an ``H x W x 3`` image."""
    img = np.asarray(image)
    if img.ndim == 2:
        return img.astype(np.float64)
    num = img[..., 0].astype(np.int64) * LUMA_WEIGHTS[0] \
        + img[..., 1].astype(np.int64) * LUMA_WEIGHTS[1] \
        + img[..., 2].astype(np.int64) * LUMA_WEIGHTS[2]
    return num / LUMA_SCALE


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def box_pixel_window(box: Box, width: int, height: int, expand: float = 1.0):
    """Integer pixel ranges ``(x0, x1, y0, y1)`` covered by ``box``.

    Box edges are rounded half-up, so an integer box ``(x, y, w, h)`` covers
    exactly columns ``x..x+w-1`` and rows ``y..y+h-1``. A box smaller than a
    pixel falls back to the pixel under its clipped centre.
    """
    cx, cy = box.center
    hw, hh = box.w * expand / 2.0, box.h * expand / 2.0
    bx0, bx1, by0, by1 = cx - hw, cx + hw, cy - hh, cy + hh
    if bx1 <= 0 or by1 <= 0 or bx0 >= width or by0 >= height:
        raise ValueError(f"box {box} lies fully outside the {width}x{height} image")
    x0 = max(_round_half_up(bx0), 0)
    x1 = min(_round_half_up(bx1), width)
    y0 = max(_round_half_up(by0), 0)
    y1 = min(_round_half_up(by1), height)
    if x1 <= x0:
        x0 = min(max(int(math.floor(min(max(cx, 0.0), width - 1e-9))), 0), width - 1)
        x1 = x0 + 1
    if y1 <= y0:
        y0 = min(max(int(math.floor(min(max(cy, 0.0), height - 1e-9))), 0), height - 1)
        y1 = y0 + 1
    return x0, x1, y0, y1


def lai_sums(image: np.ndarray, box: Box, expand: float = 1.0) -> tuple[int, int]:
    """Integer luma numerator (scaled by 1000) and pixel count inside ``box``."""
    img = np.asarray(image)
    h, w = img.shape[:2]
    x0, x1, y0, y1 = box_pixel_window(box, w, h, expand)
    patch = img[y0:y1, x0:x1]
    if patch.ndim == 2:
        num = int(patch.astype(np.int64).sum()) * LUMA_SCALE
    else:
        p = patch.astype(np.int64)
        num = int((p[..., 0] * LUMA_WEIGHTS[0] + p[..., 1] * LUMA_WEIGHTS[1]
                   + p[..., 2] * LUMA_WEIGHTS[2]).sum())
    return num, (x1 - x0) * (y1 - y0)


def lai_value(image: np.ndarray, box: Box, expand: float = 1.0) -> float:
    """Mean BT.601 luma over the pixels of ``box`` clipped to the image."""
    num, n = lai_sums(image, box, expand)
    return num / (LUMA_SCALE * n)


def outside_range(ratio: float, cfg: AttributeConfig) -> bool:
    return ratio < cfg.ratio_low or ratio > cfg.ratio_high


def is_low_resolution(area: float, cfg: AttributeConfig) -> bool:
    return area < cfg.lr_area


def is_low_light(value: float, cfg: AttributeConfig) -> bool:
    return value < cfg.lai_threshold


def frame_flags(seq: Sequence, images: Iterable[np.ndarray] | None = None,
                config: AttributeConfig | None = None) -> list[FrameAttributeFlags]:
    """Per-frame SV/ARC/LR/LAI flags for every frame that has a GT box.

    ``images`` must be aligned with ``seq.frames``; when omitted, frames are
    decoded from disk (only boxed frames are read).
    """
    cfg = config or AttributeConfig()
    ref = seq.frames[0].gt
    if ref is None:
        raise ValueError(f"{seq.name}: first frame has no reference box")
    ref_aspect = ref.w / ref.h
    if images is None:
        images = (read_image(f.image_path) if f.gt is not None else None for f in seq.frames)

    out = []
    for f, img in zip(seq.frames, images):
        if f.gt is None:
            continue
        b = f.gt
        area_ratio = b.area / ref.area
        aspect_change = (b.w / b.h) / ref_aspect
        value = lai_value(img, b, cfg.lai_expand)
        out.append(FrameAttributeFlags(
            index=f.index,
            sv=outside_range(area_ratio, cfg),
            arc=outside_range(aspect_change, cfg),
            lr=is_low_resolution(b.area, cfg),
            lai=is_low_light(value, cfg),
            lai_value=value,
            area_ratio=area_ratio,
            aspect_ratio_change=aspect_change,
        ))
    return out


def sequence_attributes(seq: Sequence, flags: list[FrameAttributeFlags],
                        config: AttributeConfig | None = None) -> AttributeSet:
    """Sequence-level attributes: SV/ARC if any boxed frame is flagged, LR/LAI
    if at least the configured fraction (default half) of boxed frames are."""
    cfg = config or AttributeConfig()
    names = set(seq.manual_attributes & MANUAL_ATTRIBUTES)
    n = len(flags)
    if n:
        if any(f.sv for f in flags):
            names.add("SV")
        if any(f.arc for f in flags):
            names.add("ARC")
        if sum(f.lr for f in flags) >= cfg.lr_fraction * n:
            names.add("LR")
        if sum(f.lai for f in flags) >= cfg.lai_fraction * n:
            names.add("LAI")
    return AttributeSet(frozenset(names))


def compute_attributes(seq: Sequence, config: AttributeConfig | None = None):
    flags = frame_flags(seq, None, config)
    return sequence_attributes(seq, flags, config), flags


def cooccurrence_matrix(attribute_sets: Iterable) -> np.ndarray:
    """12x12 count matrix; entry (i, j) counts sequences carrying both
    attributes i and j. Accepts AttributeSets or (Sequence, AttributeSet)
    pairs."""
    rows = []
    for item in attribute_sets:
        aset = item[1] if isinstance(item, tuple) else item
        rows.append(aset.flags)
    if not rows:
        return np.zeros((len(ATTRIBUTE_NAMES), len(ATTRIBUTE_NAMES)), dtype=np.int64)
    F = np.array(rows, dtype=np.int64)
    return F.T @ F
