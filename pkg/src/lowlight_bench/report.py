"""Ranking tables, curve files and JSON reports.

CSV files store floats with 6 significant digits; ``report.json`` keeps full
precision so it reloads to the identical in-memory report.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence as SequenceT

import numpy as np

from .dataset import ATTRIBUTE_NAMES
from .metrics import EvalReport, rank

CURVE_FIELDS = {
    "success": "success_curve",
    "precision": "precision_curve",
    "norm_precision": "norm_precision_curve",
}
ATTRIBUTE_METRICS = ("s_auc", "p_at_20", "p_norm_auc")


def fmt(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.6g}"


@dataclass
class RankingRow:
    rank: int
    tracker: str
    s_auc: float
    p: float
    p_norm: float


def ranking_table(reports: SequenceT[EvalReport]) -> list[RankingRow]:
    return [RankingRow(i, r.tracker_name, r.s_auc, r.p_at_20, r.p_norm_auc)
            for i, r in enumerate(rank(reports), 1)]


def render_ranking(rows: list[RankingRow]) -> str:
    """Plain-text table with values rounded to 3 decimals."""
    width = max([len("Tracker")] + [len(r.tracker) for r in rows])
    lines = [f"{'#':>3}  {'Tracker':<{width}}  {'S_AUC':>6}  {'P':>6}  {'P_Norm':>6}"]
    for r in rows:
        lines.append(f"{r.rank:>3}  {r.tracker:<{width}}  {r.s_auc:6.3f}  {r.p:6.3f}  {r.p_norm:6.3f}")
    return "\n".join(lines)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    _write_csv(path, ["attribute", *ATTRIBUTE_NAMES],
               [[name, *(int(v) for v in row)] for name, row in zip(ATTRIBUTE_NAMES, matrix)])


def save_reports_json(path: Path, reports: SequenceT[EvalReport]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"reports": [r.to_dict() for r in rank(reports)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_reports_json(path: Path) -> list[EvalReport]:
    with open(path) as fh:
        return [EvalReport.from_dict(d) for d in json.load(fh)["reports"]]


def emit_report(reports: SequenceT[EvalReport], out_dir: str | Path,
                cooccurrence: np.ndarray | None = None, json_name: str = "report.json") -> list[Path]:
    """Write ranking.csv, the JSON report, per-tracker curves, per-attribute
    tables and (when given) the co-occurrence matrix under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    rows = ranking_table(reports)
    p = out / "ranking.csv"
    _write_csv(p, ["rank", "tracker", "s_auc", "p", "p_norm"],
               [[r.rank, r.tracker, fmt(r.s_auc), fmt(r.p), fmt(r.p_norm)] for r in rows])
    written.append(p)

    p = out / json_name
    save_reports_json(p, reports)
    written.append(p)

    for rep in rank(reports):
        for metric, attr in CURVE_FIELDS.items():
            curve = getattr(rep, attr)
            p = out / "curves" / f"{rep.tracker_name}_{metric}.csv"
            _write_csv(p, ["threshold", "value"],
                       [[fmt(t), fmt(v)] for t, v in zip(curve.thresholds, curve.values)])
            written.append(p)

    for name in ATTRIBUTE_NAMES:
        for metric in ATTRIBUTE_METRICS:
            entries = []
            for rep in reports:
                sub = rep.per_attribute.get(name)
                if sub is not None and not sub.empty:
                    entries.append((rep.tracker_name, getattr(sub, metric), sub.n_sequences))
            entries.sort(key=lambda e: (-e[1], e[0]))
            p = out / "attributes" / f"{name}_{metric}.csv"
            _write_csv(p, ["tracker", "value", "n_sequences"], [[t, fmt(v), n] for t, v, n in entries])
            written.append(p)

    if cooccurrence is not None:
        p = out / "cooccurrence.csv"
        write_matrix_csv(p, cooccurrence)
        written.append(p)
    return written


def write_ablation_csv(path: str | Path, rows) -> None:
    _write_csv(Path(path), ["layers", "s_auc", "p", "p_norm", "seconds"],
               [[r.layers, fmt(r.s_auc), fmt(r.p), fmt(r.p_norm), fmt(r.seconds)] for r in rows])
