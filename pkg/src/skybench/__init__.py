"""Cross-view geolocation toolkit: synthetic sites, samplers, model, metrics."""

__version__ = "0.1.0"

from .errors import (
    CorruptTile,
    DataError,
    DegenerateConfiguration,
    InputError,
    InsufficientViews,
    InvalidBatch,
    InvalidCamera,
    InvalidPairing,
    InvalidQuadkey,
    InvalidShape,
    InvalidTaps,
    InvalidTile,
    ManifestParseError,
    NetworkError,
    OutOfProjection,
    SkybenchError,
    TileUnavailable,
)
from .geometry import (
    CameraIntrinsics,
    CameraVector9,
    Pose,
    Rotation3,
    SimilarityTransform,
    UnitQuaternion,
    pair_distance,
    relative_pose,
    rotation_error_deg,
    rotation_geodesic_distance,
    rotation_about_axis,
    rotation_about_z,
    rotation_to_quat,
    quat_to_rotation,
    translation_direction_error_deg,
    weighted_similarity_procrustes,
)
from .evaluation import (
    EvalConfig,
    MetricReport,
    PairError,
    aggregate_reports,
    evaluate_poses,
    format_report,
    pair_errors,
    parse_report,
    psnr,
    rra_rta,
)
from .curriculum import (
    CurriculumProgress,
    DistanceCache,
    ModalityCounts,
    build_distance_cache,
    composed_sample,
    curriculum_sample,
    load_distance_cache,
    modality_counts,
    sample_by_modality,
    save_distance_cache,
)

__all__ = [
    "CameraIntrinsics",
    "CameraVector9",
    "CorruptTile",
    "CurriculumProgress",
    "DataError",
    "DegenerateConfiguration",
    "DistanceCache",
    "EvalConfig",
    "InputError",
    "InsufficientViews",
    "InvalidBatch",
    "InvalidCamera",
    "InvalidPairing",
    "InvalidQuadkey",
    "InvalidShape",
    "InvalidTaps",
    "InvalidTile",
    "ManifestParseError",
    "MetricReport",
    "ModalityCounts",
    "NetworkError",
    "OutOfProjection",
    "PairError",
    "Pose",
    "Rotation3",
    "SimilarityTransform",
    "SkybenchError",
    "TileUnavailable",
    "UnitQuaternion",
    "__version__",
    "aggregate_reports",
    "build_distance_cache",
    "composed_sample",
    "curriculum_sample",
    "evaluate_poses",
    "format_report",
    "load_distance_cache",
    "modality_counts",
    "pair_distance",
    "pair_errors",
    "parse_report",
    "psnr",
    "quat_to_rotation",
    "relative_pose",
    "rotation_about_axis",
    "rotation_about_z",
    "rotation_error_deg",
    "rotation_geodesic_distance",
    "rotation_to_quat",
    "sample_by_modality",
    "save_distance_cache",
    "translation_direction_error_deg",
    "weighted_similarity_procrustes",
]
