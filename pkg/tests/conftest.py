from pathlib import Path

import numpy as np
import pytest

from lowlight_bench.dataset import (
    Box,
    Frame,
    Sequence,
    Visibility,
    load_sequence,
    write_boxes,
    write_image,
)
from lowlight_bench.synth import generate, preset


def write_sequence(seq_dir, boxes, vis=None, size=(100, 100), fill=60, images=None):
    """Write a benchmark-format sequence with constant-gray frames (or ``images``)."""
    seq_dir = Path(seq_dir)
    n = len(boxes)
    W, H = size
    for i in range(n):
        img = images[i] if images is not None else np.full((H, W, 3), fill, np.uint8)
        write_image(seq_dir / "img" / f"{i + 1:08d}.png", img)
    write_boxes(seq_dir / "groundtruth_rect.txt", boxes)
    if vis is not None:
        (seq_dir / "visibility.txt").write_text("".join(f"{int(v)}\n" for v in vis))
    return seq_dir


def memory_sequence(name, boxes, vis=None, size=(100, 100)):
    """In-memory Sequence (no image files) for metric-only tests."""
    vis = vis or [Visibility.VISIBLE] * len(boxes)
    frames = tuple(
        Frame(i + 1, Path(f"{i + 1:08d}.png"), Visibility(v), b if Visibility(v).has_box else None)
        for i, (b, v) in enumerate(zip(boxes, vis))
    )
    return Sequence(name, frames, frozenset(), size)


@pytest.fixture
def easy_seq(tmp_path):
    return load_sequence(generate(preset("easy"), tmp_path / "easy"))


@pytest.fixture
def box10():
    return Box(10.0, 10.0, 20.0, 20.0)
