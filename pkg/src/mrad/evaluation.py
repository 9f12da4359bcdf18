"""Image- and pixel-level metrics and dataset-level aggregation.

AUROC follows the Mann-Whitney formulation (ties count half), average
precision is the step-wise sum over descending grouped thresholds. Pixel
metrics pool the pixels of every evaluated image into one population, so a
single number describes localization over the whole set.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mrad.clustering import DetectionResult
from mrad.detectors import PixelEvalMap
from mrad.imaging import LABEL_ANOMALY, LabelMask


class UndefinedMetricError(ValueError):
    """Raised when a metric has no value for the given label population."""


@dataclass(frozen=True, eq=False)
class LabeledScores:
    """Parallel score/label arrays; labels are 0 or 1."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores)
        labels = np.asarray(self.labels)
        if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
            raise ValueError("scores and labels must be 1-D arrays of equal length")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)


def auroc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Computed from tie-averaged ranks in O(n log n); tied pairs count 1/2.
    Raises UndefinedMetricError when either class is absent.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both a positive and a negative label")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    n = s.size
    boundaries = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    # 1-based rank averaged within each tie group.
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    rank_sum = ranks[np.asarray(y) == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-wise average precision over descending grouped score thresholds.

    AP = sum over thresholds of (recall step) * precision, tied scores
    processed as one group. Raises UndefinedMetricError with no positives.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    n_pos = int(np.count_nonzero(y == 1))
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive label")
    order = np.argsort(-s, kind="mergesort")
    sorted_s = s[order]
    sorted_y = (np.asarray(y)[order] == 1).astype(np.int64)
    n = s.size
    ends = np.concatenate((np.flatnonzero(np.diff(sorted_s)), [n - 1]))
    tp = np.cumsum(sorted_y)[ends].astype(np.float64)
    seen = (ends + 1).astype(np.float64)
    precision = tp / seen
    recall = tp / n_pos
    recall_prev = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - recall_prev) * precision).sum())


@dataclass(frozen=True)
class PerImageMetrics:
    image_id: str
    image_score: float
    verdict: str
    is_anomalous: bool
    pixel_ap: float | None


@dataclass(frozen=True)
class MetricsReport:
    """Benchmark metrics plus per-image rows and the config that produced them."""

    i_auroc: float | None
    p_auroc: float | None
    p_ap: float | None
    per_image: list[PerImageMetrics] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "i_auroc": self.i_auroc,
            "p_auroc": self.p_auroc,
            "p_ap": self.p_ap,
            "per_image": [
                {
                    "image_id": row.image_id,
                    "image_score": row.image_score,
                    "verdict": row.verdict,
                    "label": "anomalous" if row.is_anomalous else "normal",
                    "pixel_ap": row.pixel_ap,
                }
                for row in self.per_image
            ],
            "config": self.config,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "image_score", "verdict", "label", "pixel_ap"])
            for row in self.per_image:
                writer.writerow(
                    [
                        row.image_id,
                        row.image_score,
                        row.verdict,
                        "anomalous" if row.is_anomalous else "normal",
                        "" if row.pixel_ap is None else row.pixel_ap,
                    ]
                )


def evaluate_run(
    results: Iterable[tuple[DetectionResult, PixelEvalMap, LabelMask | None, bool]],
    image_ids: Sequence[str] | None = None,
    config: dict | None = None,
) -> MetricsReport:
    """Aggregate per-image detections into I.AUROC, P.AUROC, and P.AP.

    Each item is (detection, eval map, label mask, image-level label); a
    None mask stands for an anomaly-free image. Pixel metrics pool the
    pixels of all images (pixel positive iff its mask label is anomaly).
    Undefined metrics come back as None with a warning.
    """
    image_scores: list[float] = []
    image_labels: list[int] = []
    rows: list[PerImageMetrics] = []
    pooled_scores: list[np.ndarray] = []
    pooled_labels: list[np.ndarray] = []

    for index, (result, eval_map, mask, is_anomalous) in enumerate(results):
        image_id = image_ids[index] if image_ids is not None else f"image_{index:04d}"
        values = eval_map.values
        if mask is not None and mask.labels.shape != values.shape:
            raise ValueError(
                f"{image_id}: mask {mask.labels.shape} does not match "
                f"eval map {values.shape}"
            )
        pixel_labels = (
            np.zeros(values.shape, dtype=np.uint8)
            if mask is None
            else (mask.labels == LABEL_ANOMALY).astype(np.uint8)
        )
        flat_scores = values.ravel().astype(np.float32)
        flat_labels = pixel_labels.ravel()
        pooled_scores.append(flat_scores)
        pooled_labels.append(flat_labels)

        pixel_ap = None
        if flat_labels.any():
            pixel_ap = average_precision(flat_scores, flat_labels)
        image_scores.append(result.image_score)
        image_labels.append(1 if is_anomalous else 0)
        rows.append(
            PerImageMetrics(
                image_id=image_id,
                image_score=result.image_score,
                verdict=result.verdict,
                is_anomalous=bool(is_anomalous),
                pixel_ap=pixel_ap,
            )
        )

    if not rows:
        raise ValueError("no results to evaluate")

    def _try(metric, scores, labels, name):
        try:
            return metric(scores, labels)
        except UndefinedMetricError as exc:
            warnings.warn(f"{name} undefined: {exc}", stacklevel=3)
            return None

    i_auroc = _try(auroc, np.asarray(image_scores), np.asarray(image_labels), "I.AUROC")
    all_scores = np.concatenate(pooled_scores)
    all_labels = np.concatenate(pooled_labels)
    p_auroc = _try(auroc, all_scores, all_labels, "P.AUROC")
    p_ap = _try(average_precision, all_scores, all_labels, "P.AP")
    return MetricsReport(
        i_auroc=i_auroc,
        p_auroc=p_auroc,
        p_ap=p_ap,
        per_image=rows,
        config=dict(config or {}),
    )
