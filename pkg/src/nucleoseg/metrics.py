"""IoU/Dice metrics and batch evaluation reports.

Per-image intersection-over-union is the primary quality measure; the
report macro-averages it over images (mean of per-image values, not a
pooled pixel count). When both masks are empty the pair is scored 1.0:
perfect agreement on absence.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import load_mask
from .errors import MissingInputError
from .fileio import read_gray, write_json_atomic, write_text_atomic
from .imaging import as_mask
from .postprocess import PostprocessConfig, postprocess

__all__ = [
    "ImageMetrics",
    "MetricsReport",
    "iou",
    "dice",
    "evaluate",
    "report_to_csv",
    "write_report",
]

REPORT_FORMAT = "report/1"


def _counts(target: np.ndarray, pred: np.ndarray) -> tuple[int, int, int]:
    target = as_mask(target)
    pred = as_mask(pred)
    if target.shape != pred.shape:
        raise ValueError(f"mask dimensions differ: {target.shape} vs {pred.shape}")
    t = target == 255
    p = pred == 255
    return int((t & p).sum()), int(t.sum()), int(p.sum())


def iou(target: np.ndarray, pred: np.ndarray) -> float:
    """|target AND pred| / |target OR pred|; 1.0 when both are empty."""
    inter, t, p = _counts(target, pred)
    union = t + p - inter
    return 1.0 if union == 0 else inter / union


def dice(target: np.ndarray, pred: np.ndarray) -> float:
    """2 |target AND pred| / (|target| + |pred|); 1.0 when both are empty."""
    inter, t, p = _counts(target, pred)
    total = t + p
    return 1.0 if total == 0 else 2.0 * inter / total


@dataclass(frozen=True)
class ImageMetrics:
    id: str
    iou: float
    dice: float
    target_px: int
    pred_px: int
    intersection_px: int


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[ImageMetrics, ...]
    mean_iou: float
    mean_dice: float

    @property
    def count(self) -> int:
        return len(self.rows)

    @classmethod
    def from_rows(cls, rows) -> "MetricsReport":
        rows = tuple(rows)
        if not rows:
            raise ValueError("cannot build a report from zero images")
        return cls(
            rows=rows,
            mean_iou=float(np.mean([r.iou for r in rows])),
            mean_dice=float(np.mean([r.dice for r in rows])),
        )


def evaluate(
    dataset_dir: str | Path,
    ids,
    predictions_dir: str | Path,
    cfg: PostprocessConfig = PostprocessConfig(),
    parallelism: int = 1,
) -> MetricsReport:
    """Score post-processed predictions against ground-truth masks.

    Every id must have a probability-map PNG in ``predictions_dir``;
    missing files are reported together up front. Rows are assembled in
    id order so the report is deterministic under any parallelism.
    """
    dataset_dir = Path(dataset_dir)
    predictions_dir = Path(predictions_dir)
    ids = [str(i) for i in ids]
    if not ids:
        raise ValueError("no ids to evaluate")
    missing = [i for i in ids if not (predictions_dir / f"{i}.png").is_file()]
    if missing:
        raise MissingInputError(
            f"missing prediction files for {len(missing)} ids: {', '.join(missing)}"
        )

    def score(stem: str) -> ImageMetrics:
        target = load_mask(dataset_dir, stem)
        probmap = read_gray(predictions_dir / f"{stem}.png")
        pred = postprocess(probmap, cfg)
        inter, t, p = _counts(target, pred)
        union = t + p - inter
        return ImageMetrics(
            id=stem,
            iou=1.0 if union == 0 else inter / union,
            dice=1.0 if t + p == 0 else 2.0 * inter / (t + p),
            target_px=t,
            pred_px=p,
            intersection_px=inter,
        )

    ordered = sorted(ids)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(score, ordered))
    else:
        rows = [score(stem) for stem in ordered]
    return MetricsReport.from_rows(rows)


def report_to_csv(report: MetricsReport) -> str:
    """CSV with one row per image and a final MEAN row.

    Floats are rendered with repr so the file is byte-stable and
    round-trips exactly.
    """
    lines = ["id,iou,dice,target_px,pred_px,intersection_px"]
    for r in report.rows:
        lines.append(f"{r.id},{r.iou!r},{r.dice!r},{r.target_px},{r.pred_px},{r.intersection_px}")
    mean_t = float(np.mean([r.target_px for r in report.rows]))
    mean_p = float(np.mean([r.pred_px for r in report.rows]))
    mean_i = float(np.mean([r.intersection_px for r in report.rows]))
    lines.append(f"MEAN,{report.mean_iou!r},{report.mean_dice!r},{mean_t!r},{mean_p!r},{mean_i!r}")
    return "\n".join(lines) + "\n"


def write_report(report: MetricsReport, csv_path: str | Path) -> None:
    """Write the CSV report plus a JSON document with the same fields."""
    csv_path = Path(csv_path)
    write_text_atomic(csv_path, report_to_csv(report))
    doc = {
        "format": REPORT_FORMAT,
        "count": report.count,
        "mean_iou": report.mean_iou,
        "mean_dice": report.mean_dice,
        "rows": [
            {
                "id": r.id,
                "iou": r.iou,
                "dice": r.dice,
                "target_px": r.target_px,
                "pred_px": r.pred_px,
                "intersection_px": r.intersection_px,
            }
            for r in report.rows
        ],
    }
    write_json_atomic(csv_path.with_suffix(".json"), doc)
