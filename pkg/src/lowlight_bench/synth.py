"""Deterministic synthetic low-light sequences with exact ground truth.

Each knob exercises one challenge attribute: motion (trajectory), scale
oscillation (SV/ARC), illumination multiplier (IV/LAI), box blur (MB) and
occlusion intervals (FOC).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import kernels
from .dataset import (
    ATTRIBUTE_FILE,
    GT_FILE,
    IMAGE_DIR,
    VISIBILITY_FILE,
    Box,
    Visibility,
    write_attribute_flags,
    write_boxes,
    write_image,
)


class SynthSpecError(ValueError):
    pass


@dataclass
class SynthSpec:
    width: int = 200
    height: int = 120
    frames: int = 40
    target_w: int = 32
    target_h: int = 32
    cell: int = 5
    start_x: float = 20.0
    start_y: float = 44.0
    # constant velocity or one (vx, vy) step per frame transition
    vx: float | list[float] = 2.0
    vy: float | list[float] = 0.0
    scale_amp: float = 0.0
    scale_period: float = 40.0
    illumination: float | list[float] = 1.0
    noise_sigma: float = 0.0
    blur: int = 0
    occlusions: list[list[int]] = field(default_factory=list)
    seed: int = 0
    background_level: float = 60.0
    background_texture: bool = False
    texture_amp: float = 40.0
    texture_block: int = 3
    camera_motion: bool = False
    target_high: float = 200.0
    target_low: float = 30.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SynthSpecError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def _per_step(self, v) -> np.ndarray:
        n = self.frames - 1
        if np.isscalar(v):
            return np.full(n, float(v))
        arr = np.asarray(v, dtype=np.float64)
        if arr.shape != (n,):
            raise SynthSpecError(f"per-frame velocity needs {n} entries, got {arr.shape}")
        return arr

    def illumination_at(self) -> np.ndarray:
        if np.isscalar(self.illumination):
            return np.full(self.frames, float(self.illumination))
        arr = np.asarray(self.illumination, dtype=np.float64)
        if arr.shape != (self.frames,):
            raise SynthSpecError(f"illumination needs {self.frames} entries, got {arr.shape}")
        return arr

    def scale_at(self, k: int) -> float:
        """Scale factor at 0-based frame ``k`` (1.0 on the first frame)."""
        if self.scale_amp == 0:
            return 1.0
        return 1.0 + self.scale_amp * math.sin(2.0 * math.pi * k / self.scale_period)

    def occluded(self, index: int) -> bool:
        return any(a <= index <= b for a, b in self.occlusions)

    def centers(self) -> np.ndarray:
        c0 = np.array([self.start_x + self.target_w / 2.0, self.start_y + self.target_h / 2.0])
        steps = np.stack([self._per_step(self.vx), self._per_step(self.vy)], axis=1)
        return c0 + np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])

    def boxes(self) -> list[Box]:
        """Integer GT boxes, one per frame (including occluded frames)."""
        out = []
        for k, (cx, cy) in enumerate(self.centers()):
            s = self.scale_at(k)
            w = max(1, _round(self.target_w * s))
            h = max(1, _round(self.target_h * s))
            out.append(Box(float(_round(cx - w / 2.0)), float(_round(cy - h / 2.0)), float(w), float(h)))
        return out

    def validate(self) -> None:
        if self.frames < 2:
            raise SynthSpecError("need at least 2 frames")
        if self.width < 1 or self.height < 1 or self.target_w < 1 or self.target_h < 1:
            raise SynthSpecError("canvas and target sizes must be positive")
        if self.cell < 1:
            raise SynthSpecError("checker cell size must be positive")
        if self.blur < 0 or self.noise_sigma < 0:
            raise SynthSpecError("blur and noise must be non-negative")
        m = self.illumination_at()
        if np.any(m <= 0) or np.any(m > 1):
            raise SynthSpecError("illumination multiplier must lie in (0, 1]")
        if self.scale_amp and not (0 <= abs(self.scale_amp) < 1 and self.scale_period > 0):
            raise SynthSpecError("scale amplitude must be below 1 with a positive period")
        for iv in self.occlusions:
            if len(iv) != 2 or iv[0] > iv[1]:
                raise SynthSpecError(f"bad occlusion interval {iv}")
        if self.occluded(1):
            raise SynthSpecError("first frame must be visible")
        for i, b in enumerate(self.boxes(), 1):
            if b.x < 0 or b.y < 0 or b.x + b.w > self.width or b.y + b.h > self.height:
                raise SynthSpecError(f"target leaves the canvas at frame {i}: {b}")


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


PRESETS = {
    "easy": dict(),
    "dark": dict(illumination=15.0 / 255.0, noise_sigma=3.0, target_high=255.0, target_low=128.0),
    "occluded": dict(occlusions=[[15, 19]]),
    "scaled": dict(width=240, height=160, frames=60, target_w=40, target_h=40, start_x=100.0,
                   start_y=60.0, vx=1.0, vy=0.0, scale_amp=0.6, scale_period=40.0),
    "pan": dict(width=240, height=160, frames=40, start_x=60.0, start_y=60.0, vx=2.0, vy=1.0,
                background_texture=True, camera_motion=True),
}


def preset(name: str, **overrides) -> SynthSpec:
    try:
        params = dict(PRESETS[name])
    except KeyError:
        raise SynthSpecError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    params.update(overrides)
    return SynthSpec(**params)


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def target_patch(spec: SynthSpec, w: int, h: int) -> np.ndarray:
    """Checkerboard texture at size ``h x w`` (before illumination)."""
    u = np.floor((np.arange(w) + 0.5) * spec.target_w / w / spec.cell).astype(np.int64)
    v = np.floor((np.arange(h) + 0.5) * spec.target_h / h / spec.cell).astype(np.int64)
    parity = (v[:, None] + u[None, :]) % 2
    return np.where(parity == 0, spec.target_high, spec.target_low).astype(np.float64)


def _texture(spec: SynthSpec, margin: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=np.array([spec.seed, 2**32 - 1], dtype=np.uint64)))
    H, W = spec.height + 2 * margin, spec.width + 2 * margin
    b = max(1, spec.texture_block)
    coarse = rng.uniform(-1.0, 1.0, size=(H // b + 2, W // b + 2))
    fine = np.kron(coarse, np.ones((b, b)))[:H, :W]
    fine = kernels.box_blur(fine, 1)
    return spec.background_level + spec.texture_amp * fine


def frame_noise(seed: int, index: int, shape, sigma: float) -> np.ndarray:
    """Gaussian noise keyed on (seed, frame); pixel order is the counter."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))
    return rng.normal(0.0, sigma, size=shape)


def render_frame(spec: SynthSpec, k: int, box: Box, texture=None, margin: int = 0) -> np.ndarray:
    """Render 0-based frame ``k`` as an ``H x W x 3`` uint8 image."""
    H, W = spec.height, spec.width
    if spec.background_texture:
        if spec.camera_motion:
            ox = _round(spec.centers()[k][0] - spec.centers()[0][0])
            oy = _round(spec.centers()[k][1] - spec.centers()[0][1])
        else:
            ox = oy = 0
        img = texture[margin - oy:margin - oy + H, margin - ox:margin - ox + W].copy()
    else:
        img = np.full((H, W), float(spec.background_level))
    if not spec.occluded(k + 1):
        x, y, w, h = (int(v) for v in box.as_tuple())
        img[y:y + h, x:x + w] = target_patch(spec, w, h)
    img = img * spec.illumination_at()[k]
    if spec.blur:
        img = kernels.box_blur(img, spec.blur)
    if spec.noise_sigma:
        img = img + frame_noise(spec.seed, k + 1, img.shape, spec.noise_sigma)
    gray = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def iter_frames(spec: SynthSpec) -> Iterator[tuple[np.ndarray, Box | None, Visibility]]:
    """Yield ``(image, gt_box_or_None, visibility)`` per frame."""
    spec.validate()
    boxes = spec.boxes()
    texture, margin = None, 0
    if spec.background_texture:
        c = spec.centers()
        margin = int(np.ceil(np.abs(c - c[0]).max())) + 2 if spec.camera_motion else 0
        texture = _texture(spec, margin)
    for k, box in enumerate(boxes):
        img = render_frame(spec, k, box, texture, margin)
        vis = Visibility.FOC if spec.occluded(k + 1) else Visibility.VISIBLE
        yield img, (box if vis == Visibility.VISIBLE else None), vis


def implied_attributes(spec: SynthSpec) -> set[str]:
    names = set()
    m = spec.illumination_at()
    if m.max() - m.min() > 0:
        names.add("IV")
    if spec.blur:
        names.add("MB")
    if spec.occlusions:
        names.add("FOC")
    return names


def generate(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Write a sequence directory in the benchmark format; returns its path."""
    out_dir = Path(out_dir)
    spec.validate()
    img_dir = out_dir / IMAGE_DIR
    img_dir.mkdir(parents=True, exist_ok=True)
    gts, vis = [], []
    for i, (img, box, v) in enumerate(iter_frames(spec), 1):
        write_image(img_dir / f"{i:08d}.png", img)
        gts.append(box)
        vis.append(v)
    write_boxes(out_dir / GT_FILE, gts)
    with open(out_dir / VISIBILITY_FILE, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in vis)
    write_attribute_flags(out_dir / ATTRIBUTE_FILE, implied_attributes(spec))
    with open(out_dir / "synth_spec.json", "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def generate_dataset(specs: dict[str, SynthSpec], root: str | Path) -> Path:
    root = Path(root)
    for name, spec in specs.items():
        generate(spec, root / name)
    return root
