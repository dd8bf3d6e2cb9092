"""Low-light single-object tracking benchmark toolkit."""

from ._accel import BACKEND
from .dataset import Box, Sequence, TrackResult, Visibility, load_dataset, load_results, load_sequence

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Box",
    "Sequence",
    "TrackResult",
    "Visibility",
    "load_dataset",
    "load_results",
    "load_sequence",
]
