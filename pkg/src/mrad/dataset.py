"""On-disk dataset layout: query/, reference/, mask/ plus labels.csv.

Files are matched across the sibling directories by identical basename.
Masks are only required for anomalous-labeled queries, mirroring datasets
that ship ground truth for defective samples only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class DatasetLayoutError(ValueError):
    """Raised when the on-disk tree violates the layout contract."""


@dataclass(frozen=True)
class DatasetItem:
    name: str
    query_path: Path
    reference_path: Path | None
    mask_path: Path | None
    is_anomalous: bool | None


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    items: list[DatasetItem]


def read_labels(path: Path) -> dict[str, bool]:
    """Parse labels.csv (columns: filename,label; label in {normal, anomalous})."""
    labels: dict[str, bool] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"filename", "label"} <= set(reader.fieldnames):
            raise DatasetLayoutError(f"{path}: expected columns filename,label")
        for row in reader:
            value = row["label"].strip().lower()
            if value not in ("normal", "anomalous"):
                raise DatasetLayoutError(
                    f"{path}: invalid label {row['label']!r} for {row['filename']!r}"
                )
            labels[row["filename"]] = value == "anomalous"
    return labels


def load_layout(
    root: str | Path,
    require_reference: bool = True,
    require_labels: bool = False,
    require_masks: bool = False,
) -> DatasetLayout:
    """Scan and validate a dataset tree, returning items sorted by filename."""
    root = Path(root)
    query_dir = root / "query"
    if not query_dir.is_dir():
        raise DatasetLayoutError(f"{root}: missing query/ directory")
    query_files = sorted(p for p in query_dir.iterdir() if p.is_file())
    if not query_files:
        raise DatasetLayoutError(f"{query_dir}: no query images found")

    reference_dir = root / "reference"
    mask_dir = root / "mask"
    labels_path = root / "labels.csv"

    labels: dict[str, bool] | None = None
    if labels_path.is_file():
        labels = read_labels(labels_path)
    elif require_labels:
        raise DatasetLayoutError(f"{root}: missing labels.csv")
    if require_masks and not mask_dir.is_dir():
        raise DatasetLayoutError(f"{root}: missing mask/ directory")

    items: list[DatasetItem] = []
    for qpath in query_files:
        name = qpath.name
        ref_path = reference_dir / name
        if require_reference and not ref_path.is_file():
            raise DatasetLayoutError(f"missing reference image for {name}: {ref_path}")
        is_anomalous = None
        if labels is not None:
            if name not in labels:
                raise DatasetLayoutError(f"{labels_path}: no label for {name}")
            is_anomalous = labels[name]
        mask_path = mask_dir / name if mask_dir.is_dir() else None
        if mask_path is not None and not mask_path.is_file():
            if is_anomalous:
                raise DatasetLayoutError(f"missing mask for anomalous image {name}")
            mask_path = None
        items.append(
            DatasetItem(
                name=name,
                query_path=qpath,
                reference_path=ref_path if ref_path.is_file() else None,
                mask_path=mask_path,
                is_anomalous=is_anomalous,
            )
        )
    return DatasetLayout(root=root, items=items)
