"""Command-line front end: detect, evaluate, and fixtures subcommands.

Configuration precedence is CLI flag > config file (key=value lines) >
built-in default. Image pairs are processed by a bounded thread pool whose
size comes from --workers, then the MRAD_WORKERS environment variable, then
the logical CPU count; outputs are assembled in filename order, so results
do not depend on the worker count.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from mrad.dataset import DatasetItem, DatasetLayoutError, load_layout
from mrad.detectors import ALGORITHMS, DetectorConfig, PixelEvalMap, detect
from mrad.denoise import DenoiseConfig
from mrad.clustering import GrowConfig
from mrad.evaluation import evaluate_run
from mrad.fixtures import SceneParams, generate_scene, generate_suite
from mrad.imaging import GridSpec, load_image, load_mask, save_image, save_label_mask, save_mask
from mrad.scoring import ScoringConfig

WORKERS_ENV = "MRAD_WORKERS"

_CONFIG_KEYS = {
    "algorithm": str,
    "grid": str,
    "min-score": float,
    "epsilon": float,
    "saturation-fraction": float,
    "kernel-fraction": float,
    "stddev-range": float,
    "blur-sigma": float,
    "blur-radius": int,
    "footprint": int,
    "tolerance": float,
    "bandwidth": str,
    "area-threshold": str,
}


def _parse_grid(text: str) -> GridSpec:
    try:
        rows, cols = text.lower().split("x")
        return GridSpec(rows=int(rows), cols=int(cols))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 4x4, got {text!r}") from exc


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("detector configuration")
    group.add_argument("--config", type=Path, default=None, help="key=value config file; flags override it")
    group.add_argument("--algorithm", choices=ALGORITHMS, default=None, help="detector to run (default mrad)")
    group.add_argument("--grid", default=None, help="scoring grid as ROWSxCOLS (default 4x4)")
    group.add_argument("--min-score", type=float, default=None, help="minimum retained scaled score (default 20)")
    group.add_argument("--epsilon", type=float, default=None, help="covariance regularization epsilon (default 1e-6)")
    group.add_argument("--saturation-fraction", type=float, default=None, help="cell saturation fraction (default 0.9)")
    group.add_argument("--kernel-fraction", type=float, default=None, help="stddev window as fraction of cell side (default 0.10)")
    group.add_argument("--stddev-range", type=float, default=None, help="stddev range suppression fraction of 255 (default 0.03)")
    group.add_argument("--blur-sigma", type=float, default=None, help="Gaussian blur sigma in pixels (default 2.0)")
    group.add_argument("--blur-radius", type=int, default=None, help="Gaussian blur kernel radius (default 5)")
    group.add_argument("--footprint", type=int, default=None, help="region growing footprint radius (default 1, a 3x3 square)")
    group.add_argument("--tolerance", type=float, default=None, help="region growing score tolerance (default 25)")
    group.add_argument("--bandwidth", default=None, help="mean shift bandwidth in pixels, or auto (default auto: 2%% of the diagonal)")
    group.add_argument("--area-threshold", default=None, help="anomalous-pixel count threshold, or auto (default auto: 0.1%% of pixels)")
    parser.add_argument("--workers", type=int, default=None, help=f"worker pool size (default ${WORKERS_ENV} or CPU count)")


def _read_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("_", "-")
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def build_config(args: argparse.Namespace) -> DetectorConfig:
    """Merge defaults, config file, and explicit flags into a DetectorConfig."""
    merged: dict[str, object] = {}
    if args.config is not None:
        for key, text in _read_config_file(args.config).items():
            caster = _CONFIG_KEYS[key]
            merged[key] = caster(text) if caster is not str else text
    flag_values = {
        "algorithm": args.algorithm,
        "grid": args.grid,
        "min-score": args.min_score,
        "epsilon": args.epsilon,
        "saturation-fraction": args.saturation_fraction,
        "kernel-fraction": args.kernel_fraction,
        "stddev-range": args.stddev_range,
        "blur-sigma": args.blur_sigma,
        "blur-radius": args.blur_radius,
        "footprint": args.footprint,
        "tolerance": args.tolerance,
        "bandwidth": args.bandwidth,
        "area-threshold": args.area_threshold,
    }
    for key, value in flag_values.items():
        if value is not None:
            merged[key] = value

    scoring_kwargs = {}
    if "grid" in merged:
        grid = merged["grid"]
        scoring_kwargs["grid"] = grid if isinstance(grid, GridSpec) else _parse_grid(str(grid))
    if "min-score" in merged:
        scoring_kwargs["min_score"] = float(merged["min-score"])
    if "epsilon" in merged:
        scoring_kwargs["regularization_epsilon"] = float(merged["epsilon"])
    denoise_kwargs = {}
    if "saturation-fraction" in merged:
        denoise_kwargs["saturation_fraction"] = float(merged["saturation-fraction"])
    if "kernel-fraction" in merged:
        denoise_kwargs["kernel_fraction"] = float(merged["kernel-fraction"])
    if "stddev-range" in merged:
        denoise_kwargs["stddev_range_fraction"] = float(merged["stddev-range"])
    if "blur-sigma" in merged:
        denoise_kwargs["blur_sigma"] = float(merged["blur-sigma"])
    if "blur-radius" in merged:
        denoise_kwargs["blur_radius"] = int(merged["blur-radius"])
    grow_kwargs = {}
    if "footprint" in merged:
        grow_kwargs["footprint_radius"] = int(merged["footprint"])
    if "tolerance" in merged:
        grow_kwargs["tolerance"] = float(merged["tolerance"])
    if "bandwidth" in merged and str(merged["bandwidth"]).lower() != "auto":
        grow_kwargs["bandwidth"] = float(merged["bandwidth"])
    area_threshold = None
    if "area-threshold" in merged and str(merged["area-threshold"]).lower() != "auto":
        area_threshold = int(merged["area-threshold"])
    return DetectorConfig(
        scoring=ScoringConfig(**scoring_kwargs),
        denoise=DenoiseConfig(**denoise_kwargs),
        grow=GrowConfig(**grow_kwargs),
        area_threshold=area_threshold,
        algorithm=str(merged.get("algorithm", "mrad")),
    )


def resolve_workers(args: argparse.Namespace) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def config_snapshot(config: DetectorConfig) -> dict:
    return asdict(config)


def _save_score_png(eval_map: PixelEvalMap, path: Path) -> None:
    arr = np.rint(np.clip(eval_map.values, 0.0, 255.0)).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def _run_item(item: DatasetItem, config: DetectorConfig):
    query = load_image(item.query_path)
    reference = None
    if config.algorithm != "rxd":
        if item.reference_path is None:
            raise DatasetLayoutError(f"missing reference image for {item.name}")
        reference = load_image(item.reference_path)
    return detect(query, reference, config)


def _process_all(items, config: DetectorConfig, workers: int, handler):
    """Run the detector over items concurrently; collect results and errors
    in filename order."""
    failures: list[tuple[str, str]] = []
    outputs: dict[str, object] = {}

    def task(item: DatasetItem):
        return handler(item, _run_item(item, config))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {item.name: pool.submit(task, item) for item in items}
        for name in sorted(futures):
            try:
                outputs[name] = futures[name].result()
            except Exception as exc:  # noqa: BLE001 - reported per image
                failures.append((name, str(exc)))
    return outputs, failures


def cmd_detect(args: argparse.Namespace) -> int:
    config = build_config(args)
    try:
        layout = load_layout(args.dataset, require_reference=config.algorithm != "rxd")
    except DatasetLayoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = resolve_workers(args)

    def handler(item: DatasetItem, detection):
        result, eval_map = detection
        stem = Path(item.name).stem
        save_mask(result.anomaly_map, out_dir / f"{stem}_mask.png")
        _save_score_png(eval_map, out_dir / f"{stem}_score.png")
        return result

    outputs, failures = _process_all(layout.items, config, workers, handler)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "pixel_count", "verdict"])
        for name in sorted(outputs):
            result = outputs[name]
            writer.writerow([name, result.pixel_count, result.verdict])
    for name, message in failures:
        print(f"error: {name}: {message}", file=sys.stderr)
    return 1 if failures else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = build_config(args)
    try:
        layout = load_layout(
            args.dataset,
            require_reference=config.algorithm != "rxd",
            require_labels=True,
            require_masks=True,
        )
    except DatasetLayoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    workers = resolve_workers(args)

    def handler(item: DatasetItem, detection):
        result, eval_map = detection
        mask = load_mask(item.mask_path) if item.mask_path is not None else None
        return result, eval_map, mask, bool(item.is_anomalous)

    outputs, failures = _process_all(layout.items, config, workers, handler)
    for name, message in failures:
        print(f"error: {name}: {message}", file=sys.stderr)
    if not outputs:
        return 1

    names = sorted(outputs)
    report = evaluate_run(
        [outputs[name] for name in names],
        image_ids=names,
        config=config_snapshot(config),
    )
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_json(out_path)
    report.write_csv(out_path.with_suffix(".csv"))

    def fmt(value: float | None) -> str:
        return "null" if value is None else f"{value:.4f}"

    print(f"I.AUROC {fmt(report.i_auroc)}  P.AUROC {fmt(report.p_auroc)}  P.AP {fmt(report.p_ap)}")
    return 1 if failures else 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    try:
        suite = generate_suite(
            args.count,
            args.anomalous_fraction,
            args.seed,
            base=SceneParams(seed=0, width=args.width, height=args.height),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    for sub in ("query", "reference", "mask"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    rows = []
    for index, params in enumerate(suite):
        scene = generate_scene(params)
        name = f"scene_{index:04d}.png"
        save_image(scene.query, out_dir / "query" / name)
        save_image(scene.reference, out_dir / "reference" / name)
        if scene.is_anomalous:
            save_label_mask(scene.mask, out_dir / "mask" / name)
        rows.append((name, "anomalous" if scene.is_anomalous else "normal"))
    with open(out_dir / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} scenes to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrad",
        description="Reference-conditioned statistical visual anomaly detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="run a detector over a dataset and write masks")
    p_detect.add_argument("dataset", type=Path, help="dataset root (query/, reference/, ...)")
    p_detect.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(p_detect)
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("evaluate", help="run a detector and score it against ground truth")
    p_eval.add_argument("dataset", type=Path, help="dataset root with mask/ and labels.csv")
    p_eval.add_argument("--out", type=Path, required=True, help="metrics report JSON path (CSV written alongside)")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_fix = sub.add_parser("fixtures", help="generate a procedural fixture dataset")
    p_fix.add_argument("--out", type=Path, required=True, help="output dataset root")
    p_fix.add_argument("--count", type=int, default=100, help="number of scenes (default 100)")
    p_fix.add_argument(
        "--anomalous-fraction", type=float, default=0.5, help="fraction of anomalous scenes (default 0.5)"
    )
    p_fix.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p_fix.add_argument("--width", type=int, default=480, help="scene width (default 480)")
    p_fix.add_argument("--height", type=int, default=270, help="scene height (default 270)")
    p_fix.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
