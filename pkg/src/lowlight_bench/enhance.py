"""Low-light preprocessing for enhance-then-track runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attributes import luma


@dataclass(frozen=True)
class EnhanceOp:
    kind: str = "none"  # none | gamma | hist_eq
    gamma: float = 1.0

    def __call__(self, image: np.ndarray) -> np.ndarray:
        if self.kind == "none":
            return image
        if self.kind == "gamma":
            return gamma(image, self.gamma)
        if self.kind == "hist_eq":
            return hist_eq(image)
        raise ValueError(f"unknown enhancement {self.kind!r}")

    def label(self) -> str:
        return f"gamma:{self.gamma:g}" if self.kind == "gamma" else {"none": "none", "hist_eq": "histeq"}[self.kind]


def parse_enhance(text: str | None) -> EnhanceOp:
    """Parse ``none``, ``gamma:<g>`` or ``histeq``."""
    if text is None or text in ("", "none"):
        return EnhanceOp()
    if text in ("histeq", "hist_eq"):
        return EnhanceOp("hist_eq")
    if text.startswith("gamma:"):
        g = float(text.split(":", 1)[1])
        if not g > 0:
            raise ValueError(f"gamma must be positive, got {g}")
        return EnhanceOp("gamma", g)
    raise ValueError(f"unknown enhancement {text!r} (expected none, gamma:<g> or histeq)")


def gamma_lut(g: float) -> np.ndarray:
    if not g > 0:
        raise ValueError(f"gamma must be positive, got {g}")
    levels = np.arange(256, dtype=np.float64)
    out = np.floor(255.0 * (levels / 255.0) ** g + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


def gamma(image: np.ndarray, g: float) -> np.ndarray:
    """Per-channel ``round(255 * (v/255) ** g)``; ``g < 1`` brightens."""
    return gamma_lut(g)[np.asarray(image, dtype=np.uint8)]


def equalization_lut(levels: np.ndarray) -> np.ndarray:
    """CDF equalization map for integer levels in ``0..255``.

    Uses ``round((cdf(v) - cdf_min) / (N - cdf_min) * 255)``; a single-level
    input maps to itself.
    """
    hist = np.bincount(levels.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    n = cdf[-1]
    cdf_min = cdf[np.nonzero(hist)[0][0]] if n else 0
    if n == cdf_min:
        return np.arange(256, dtype=np.float64)
    return np.floor((cdf - cdf_min) / (n - cdf_min) * 255.0 + 0.5)


def hist_eq(image: np.ndarray) -> np.ndarray:
    """Equalize luma and rescale R, G, B by ``luma_out / luma_in``.

    Pixels with zero luma are left unchanged.
    """
    img = np.asarray(image, dtype=np.uint8)
    y = luma(img)
    yq = np.clip(np.floor(y + 0.5), 0, 255).astype(np.int64)
    lut = equalization_lut(yq)
    y_out = lut[yq]
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(y > 0, y_out / y, 1.0)
    if img.ndim == 2:
        out = img * scale
    else:
        out = img * scale[..., None]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
