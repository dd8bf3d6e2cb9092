"""Success, precision and normalized precision under one-pass evaluation.

Conventions (fixed so results are bit-reproducible):

* success counts a frame when ``IoU > tau`` on 51 thresholds ``0, 0.02 .. 1``;
  the headline S_AUC is the exact continuous area, i.e. the mean IoU;
* precision counts a frame when ``error <= t`` on thresholds ``0 .. 50`` px,
  headline P at 20 px;
* normalized precision divides the center offset by the GT width/height and
  averages the ``<=`` curve over 51 thresholds ``0, 0.01 .. 0.5``;
* frames labelled FOC/OV are excluded; sequences carry equal weight.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence as SequenceT

import numpy as np

from .dataset import ATTRIBUTE_NAMES, Box, Sequence, TrackResult


class MetricError(ValueError):
    pass


SUCCESS_THRESHOLDS = np.arange(51) / 50.0
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
NORM_PRECISION_THRESHOLDS = np.arange(51) / 100.0


@dataclass
class MetricConfig:
    precision_threshold: float = 20.0
    pnorm_divisor: str = "gt"  # gt | tr | mean
    weighting: str = "sequence"  # sequence | frame


@dataclass
class MetricCurve:
    thresholds: list[float]
    values: list[float]

    def value_at(self, t: float) -> float:
        i = int(np.argmin(np.abs(np.asarray(self.thresholds) - t)))
        return self.values[i]


@dataclass
class AttributeReport:
    attribute: str
    n_sequences: int
    s_auc: float | None = None
    p_at_20: float | None = None
    p_norm_auc: float | None = None

    @property
    def empty(self) -> bool:
        return self.n_sequences == 0


@dataclass
class SequenceScore:
    name: str
    n_frames: int
    s_auc: float
    p_at_20: float
    p_norm_auc: float
    success: list[float]
    precision: list[float]
    norm_precision: list[float]


@dataclass
class EvalReport:
    tracker_name: str
    s_auc: float
    p_at_20: float
    p_norm_auc: float
    success_curve: MetricCurve
    precision_curve: MetricCurve
    norm_precision_curve: MetricCurve
    per_attribute: dict[str, AttributeReport]
    evaluated_frame_count: int
    per_sequence: dict[str, SequenceScore] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            tracker_name=d["tracker_name"],
            s_auc=d["s_auc"],
            p_at_20=d["p_at_20"],
            p_norm_auc=d["p_norm_auc"],
            success_curve=MetricCurve(**d["success_curve"]),
            precision_curve=MetricCurve(**d["precision_curve"]),
            norm_precision_curve=MetricCurve(**d["norm_precision_curve"]),
            per_attribute={k: AttributeReport(**v) for k, v in d["per_attribute"].items()},
            evaluated_frame_count=d["evaluated_frame_count"],
            per_sequence={k: SequenceScore(**v) for k, v in d.get("per_sequence", {}).items()},
        )


# --------------------------------------------------------------------------
# per-frame quantities
# --------------------------------------------------------------------------


def _as_boxes(a) -> np.ndarray:
    if isinstance(a, Box):
        return np.array([a.as_tuple()], dtype=np.float64)
    arr = np.asarray(a, dtype=np.float64)
    return arr.reshape(-1, 4)


def iou_array(a, b) -> np.ndarray:
    """Elementwise IoU of two ``N x 4`` arrays of ``(x, y, w, h)`` boxes."""
    a, b = _as_boxes(a), _as_boxes(b)
    ix = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    iy = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return np.clip(out, 0.0, 1.0)


def iou(a: Box, b: Box) -> float:
    return float(iou_array(a, b)[0])


def _centers(a: np.ndarray) -> np.ndarray:
    return a[:, :2] + a[:, 2:] / 2.0


def center_error_array(a, b) -> np.ndarray:
    a, b = _as_boxes(a), _as_boxes(b)
    d = _centers(a) - _centers(b)
    return np.hypot(d[:, 0], d[:, 1])


def center_error(a: Box, b: Box) -> float:
    return float(center_error_array(a, b)[0])


def norm_center_error_array(tr, gt, divisor: str = "gt") -> np.ndarray:
    tr, gt = _as_boxes(tr), _as_boxes(gt)
    if divisor == "gt":
        size = gt[:, 2:]
    elif divisor == "tr":
        size = tr[:, 2:]
    elif divisor == "mean":
        size = (tr[:, 2:] + gt[:, 2:]) / 2.0
    else:
        raise ValueError(f"unknown normalization divisor {divisor!r}")
    if np.any(size <= 0):
        raise MetricError("normalization box has zero width or height")
    d = (_centers(tr) - _centers(gt)) / size
    return np.hypot(d[:, 0], d[:, 1])


def norm_center_error(tr: Box, gt: Box, divisor: str = "gt") -> float:
    return float(norm_center_error_array(tr, gt, divisor)[0])


# --------------------------------------------------------------------------
# curves and summaries
# --------------------------------------------------------------------------


def _nonempty(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise MetricError("no evaluable frames")
    return x


def success_curve(ious) -> MetricCurve:
    x = _nonempty(ious)
    vals = (x[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return MetricCurve(SUCCESS_THRESHOLDS.tolist(), vals.tolist())


def s_auc(ious) -> float:
    """Exact area under the success curve, which is the mean IoU."""
    return float(math.fsum(_nonempty(ious)) / len(_nonempty(ious)))


def trapezoid_auc(curve: MetricCurve) -> float:
    t = np.asarray(curve.thresholds)
    v = np.asarray(curve.values)
    return float(np.sum((v[1:] + v[:-1]) * np.diff(t)) / 2.0 / (t[-1] - t[0]))


def precision_curve(errors) -> MetricCurve:
    x = _nonempty(errors)
    vals = (x[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    return MetricCurve(PRECISION_THRESHOLDS.tolist(), vals.tolist())


def precision_at(errors, threshold: float = 20.0) -> float:
    x = _nonempty(errors)
    return float(np.mean(x <= threshold))


def norm_precision_curve(norm_errors) -> MetricCurve:
    x = _nonempty(norm_errors)
    vals = (x[None, :] <= NORM_PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    return MetricCurve(NORM_PRECISION_THRESHOLDS.tolist(), vals.tolist())


def pnorm_auc(norm_errors) -> float:
    """Mean of the normalized-precision curve over its 51 thresholds."""
    return float(np.mean(norm_precision_curve(norm_errors).values))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def score_sequence(result: TrackResult, seq: Sequence, config: MetricConfig | None = None) -> SequenceScore:
    cfg = config or MetricConfig()
    if len(result.boxes) != len(seq.frames):
        raise MetricError(f"{seq.name}: {len(result.boxes)} boxes for {len(seq.frames)} frames")
    keep = [i for i, f in enumerate(seq.frames) if f.gt is not None]
    if not keep:
        raise MetricError(f"{seq.name}: no evaluable frames")
    tr = result.as_array()[keep]
    gt = np.array([seq.frames[i].gt.as_tuple() for i in keep], dtype=np.float64)
    ious = iou_array(tr, gt)
    errs = center_error_array(tr, gt)
    nerrs = norm_center_error_array(tr, gt, cfg.pnorm_divisor)
    return SequenceScore(
        name=seq.name,
        n_frames=len(keep),
        s_auc=s_auc(ious),
        p_at_20=precision_at(errs, cfg.precision_threshold),
        p_norm_auc=pnorm_auc(nerrs),
        success=success_curve(ious).values,
        precision=precision_curve(errs).values,
        norm_precision=norm_precision_curve(nerrs).values,
    )


def _average(scores: list[SequenceScore], attr: str, weighting: str):
    if weighting == "sequence":
        w = np.ones(len(scores))
    elif weighting == "frame":
        w = np.array([s.n_frames for s in scores], dtype=np.float64)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    vals = np.array([getattr(s, attr) for s in scores], dtype=np.float64)
    if vals.ndim == 1:
        return float(math.fsum(w * vals) / w.sum())
    return (w[:, None] * vals).sum(axis=0) / w.sum()


def evaluate(
    results: Mapping[str, TrackResult],
    dataset: SequenceT[Sequence],
    attribute_sets: Mapping[str, object] | None = None,
    tracker_name: str = "tracker",
    config: MetricConfig | None = None,
) -> EvalReport:
    """Aggregate per-sequence scores into an :class:`EvalReport`.

    ``attribute_sets`` maps sequence name to an AttributeSet (anything
    supporting ``in``); attributes carried by no sequence get an empty
    sub-report.
    """
    cfg = config or MetricConfig()
    if not dataset:
        raise MetricError("empty dataset")
    scores = []
    for seq in sorted(dataset, key=lambda s: s.name):
        if seq.name not in results:
            raise MetricError(f"no result for sequence {seq.name}")
        scores.append(score_sequence(results[seq.name], seq, cfg))

    per_attr = {}
    attribute_sets = attribute_sets or {}
    for name in ATTRIBUTE_NAMES:
        subset = [s for s in scores if s.name in attribute_sets and name in attribute_sets[s.name]]
        if not subset:
            per_attr[name] = AttributeReport(attribute=name, n_sequences=0)
            continue
        per_attr[name] = AttributeReport(
            attribute=name,
            n_sequences=len(subset),
            s_auc=_average(subset, "s_auc", cfg.weighting),
            p_at_20=_average(subset, "p_at_20", cfg.weighting),
            p_norm_auc=_average(subset, "p_norm_auc", cfg.weighting),
        )

    return EvalReport(
        tracker_name=tracker_name,
        s_auc=_average(scores, "s_auc", cfg.weighting),
        p_at_20=_average(scores, "p_at_20", cfg.weighting),
        p_norm_auc=_average(scores, "p_norm_auc", cfg.weighting),
        success_curve=MetricCurve(SUCCESS_THRESHOLDS.tolist(), _average(scores, "success", cfg.weighting).tolist()),
        precision_curve=MetricCurve(PRECISION_THRESHOLDS.tolist(), _average(scores, "precision", cfg.weighting).tolist()),
        norm_precision_curve=MetricCurve(
            NORM_PRECISION_THRESHOLDS.tolist(), _average(scores, "norm_precision", cfg.weighting).tolist()
        ),
        per_attribute=per_attr,
        evaluated_frame_count=sum(s.n_frames for s in scores),
        per_sequence={s.name: s for s in scores},
    )


def rank(reports: SequenceT[EvalReport]) -> list[EvalReport]:
    """Descending S_AUC; ties fall back to P, then P_Norm, then name."""
    return sorted(reports, key=lambda r: (-r.s_auc, -r.p_at_20, -r.p_norm_auc, r.tracker_name))
