"""Classical baseline trackers: static, exhaustive ZNCC and MOSSE."""

from __future__ import annotations

import abc

import numpy as np

from . import fft, kernels
from .attributes import luma
from .dataset import Box

# Scores within this margin of the best are treated as ties.
TIE_TOL = 1e-9


class Tracker(abc.ABC):
    """One-pass tracker contract: ``init`` once with the first frame and its
    ground-truth box, then ``update`` once per subsequent frame."""

    name = "tracker"

    def __init__(self, seed: int = 0):
        self.seed = seed

    @abc.abstractmethod
    def init(self, image: np.ndarray, box: Box) -> None: ...

    @abc.abstractmethod
    def update(self, image: np.ndarray) -> Box: ...


class StaticTracker(Tracker):
    """Lower-bound baseline that never moves the init box."""

    name = "static"

    def init(self, image, box):
        self.box = box

    def update(self, image):
        return self.box


def pick_offset(scores: np.ndarray) -> tuple[int, int] | None:
    """Best ``(dx, dy)`` from a ``(2r+1)^2`` score map, ties broken by
    smallest displacement then row-major order. ``None`` when no window fit."""
    finite = np.isfinite(scores)
    if not finite.any():
        return None
    r = scores.shape[0] // 2
    best = scores[finite].max()
    iy, ix = np.nonzero(finite & (scores >= best - TIE_TOL))
    dy, dx = iy - r, ix - r
    order = np.lexsort((ix, iy, dx * dx + dy * dy))
    k = order[0]
    return int(dx[k]), int(dy[k])


class NCCTracker(Tracker):
    """Fixed-template tracker that scans every integer offset within
    ``search_radius`` and keeps the one with the highest zero-normalized
    cross-correlation. Box size never changes."""

    name = "ncc"

    def __init__(self, search_radius: int = 20, seed: int = 0):
        super().__init__(seed)
        self.search_radius = int(search_radius)

    def init(self, image, box):
        gray = luma(image)
        H, W = gray.shape
        x0 = int(np.floor(box.x + 0.5))
        y0 = int(np.floor(box.y + 0.5))
        x1 = int(np.floor(box.x + box.w + 0.5))
        y1 = int(np.floor(box.y + box.h + 0.5))
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(max(x1, x0 + 1), W), min(max(y1, y0 + 1), H)
        self.template = gray[y0:y1, x0:x1].copy()
        self.pos = (x0, y0)
        self.box = box

    def scores(self, gray: np.ndarray) -> np.ndarray:
        return kernels.ncc_scores(gray, self.template, self.pos[0], self.pos[1], self.search_radius)

    def update(self, image):
        off = pick_offset(self.scores(luma(image)))
        if off is None:
            return self.box
        dx, dy = off
        self.pos = (self.pos[0] + dx, self.pos[1] + dy)
        b = self.box
        self.box = Box(b.x + dx, b.y + dy, b.w, b.h)
        return self.box


def gaussian_response(size: int, sigma: float) -> np.ndarray:
    c = size // 2
    g = np.exp(-((np.arange(size) - c) ** 2) / (2.0 * sigma ** 2))
    return np.outer(g, g)


def cosine_window(size: int) -> np.ndarray:
    w = np.hanning(size)
    return np.outer(w, w)


def parabolic_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


class MOSSETracker(Tracker):
    """Minimum-output-sum-of-squared-error correlation filter on luma.

    The filter lives on a ``window x window`` grid sampled from the box padded
    by ``padding``; the box size stays fixed.
    """

    name = "mosse"

    def __init__(self, learning_rate: float = 0.125, sigma: float = 2.0, eps: float = 1e-5,
                 window: int = 64, padding: float = 2.0, seed: int = 0):
        super().__init__(seed)
        self.lr = float(learning_rate)
        self.sigma = float(sigma)
        self.eps = float(eps)
        self.window = int(window)
        self.padding = float(padding)
        self.G = fft.rfft2(gaussian_response(self.window, self.sigma))
        self.cos = cosine_window(self.window)

    def _scale(self):
        return (self.box.w * self.padding / self.window, self.box.h * self.padding / self.window)

    def _sample(self, gray, cx, cy):
        """Preprocessed patch whose grid index ``window // 2`` sits on (cx, cy)."""
        sx, sy = self._scale()
        n = self.window
        shift = n / 2.0 - n // 2 - 0.5
        patch = kernels.bilinear_crop(gray, cx + shift * sx, cy + shift * sy,
                                      self.box.w * self.padding, self.box.h * self.padding, n, n)
        patch = np.log1p(patch)
        patch = patch - patch.mean()
        norm = np.sqrt((patch * patch).sum())
        if norm <= 1e-12:
            return None
        return patch / norm * self.cos

    def init(self, image, box):
        self.box = box
        self.center = box.center
        f = self._sample(luma(image), *self.center)
        shape = self.G.shape
        if f is None:
            self.A = np.zeros(shape, dtype=np.complex128)
            self.B = np.zeros(shape, dtype=np.complex128)
            return
        F = fft.rfft2(f)
        self.A = self.G * np.conj(F)
        self.B = F * np.conj(F)

    def response(self, patch: np.ndarray) -> np.ndarray:
        Z = fft.rfft2(patch)
        H = self.A / (self.B + self.eps)
        return fft.irfft2(H * Z, (self.window, self.window))

    def _train(self, f):
        F = fft.rfft2(f)
        self.A = self.lr * self.G * np.conj(F) + (1.0 - self.lr) * self.A
        self.B = self.lr * F * np.conj(F) + (1.0 - self.lr) * self.B

    def update(self, image):
        gray = luma(image)
        z = self._sample(gray, *self.center)
        if z is None:
            return self.box
        resp = self.response(z)
        n = self.window
        py, px = np.unravel_index(int(np.argmax(resp)), resp.shape)
        ox = px + parabolic_offset(resp[py, (px - 1) % n], resp[py, px], resp[py, (px + 1) % n])
        oy = py + parabolic_offset(resp[(py - 1) % n, px], resp[py, px], resp[(py + 1) % n, px])
        dx, dy = ox - n // 2, oy - n // 2
        if dx >= n / 2:
            dx -= n
        if dy >= n / 2:
            dy -= n
        sx, sy = self._scale()
        cx, cy = self.center[0] + dx * sx, self.center[1] + dy * sy
        self.center = (cx, cy)
        self.box = Box(cx - self.box.w / 2.0, cy - self.box.h / 2.0, self.box.w, self.box.h)
        f = self._sample(gray, cx, cy)
        if f is not None:
            self._train(f)
        return self.box


TRACKERS = {
    "static": StaticTracker,
    "ncc": NCCTracker,
    "mosse": MOSSETracker,
}


def make_tracker(name: str, **options) -> Tracker:
    try:
        cls = TRACKERS[name]
    except KeyError:
        raise ValueError(f"unknown tracker {name!r}; choose from {sorted(TRACKERS)}") from None
    return cls(**options)
