"""Reference-conditioned statistical visual anomaly detection.

Pipeline: grid-local Mahalanobis scoring of a query image against a
rendered reference, noise removal, mean-shift-seeded region growing, and
area-threshold classification, alongside whole-image RXD and PAD baselines
and an AUROC / average-precision evaluation harness.
"""
from mrad.clustering import (
    DetectionResult,
    GrowConfig,
    Seed,
    classify,
    mean_shift_seeds,
    region_grow,
)
from mrad.denoise import DenoiseConfig, gaussian_blur, local_stddev_suppress, saturate_cells
from mrad.detectors import (
    ALGORITHMS,
    DetectorConfig,
    PixelEvalMap,
    detect,
    detect_mrad,
    detect_pad,
    detect_rxd,
)
from mrad.evaluation import (
    LabeledScores,
    MetricsReport,
    UndefinedMetricError,
    auroc,
    average_precision,
    evaluate_run,
)
from mrad.fixtures import (
    AnomalyParams,
    JitterParams,
    Scene,
    SceneGenerationError,
    SceneParams,
    generate_scene,
    generate_suite,
)
from mrad.imaging import (
    BinaryMask,
    CellBounds,
    GridSpec,
    ImageRGB,
    LabelMask,
    load_image,
    load_mask,
    partition,
    save_mask,
)
from mrad.scoring import (
    ColorStats,
    ScoreMap,
    ScoringConfig,
    compute_stats,
    mrad_score,
    rxd_score,
    score_map,
)

__all__ = [
    "ALGORITHMS",
    "AnomalyParams",
    "BinaryMask",
    "CellBounds",
    "ColorStats",
    "DenoiseConfig",
    "DetectionResult",
    "DetectorConfig",
    "GridSpec",
    "GrowConfig",
    "ImageRGB",
    "JitterParams",
    "LabelMask",
    "LabeledScores",
    "MetricsReport",
    "PixelEvalMap",
    "Scene",
    "SceneGenerationError",
    "SceneParams",
    "ScoreMap",
    "ScoringConfig",
    "Seed",
    "UndefinedMetricError",
    "auroc",
    "average_precision",
    "classify",
    "compute_stats",
    "detect",
    "detect_mrad",
    "detect_pad",
    "detect_rxd",
    "evaluate_run",
    "gaussian_blur",
    "generate_scene",
    "generate_suite",
    "load_image",
    "load_mask",
    "local_stddev_suppress",
    "mean_shift_seeds",
    "mrad_score",
    "partition",
    "region_grow",
    "rxd_score",
    "saturate_cells",
    "save_mask",
    "score_map",
]
