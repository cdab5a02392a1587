"""Protection levels for map-based localization.

The package turns per-candidate-state error estimates into probabilistic
bounds on the lateral, longitudinal and vertical position error of a
vehicle: candidate poses around the estimate are scored by a pluggable
estimator, the per-candidate errors are combined into an outlier-weighted
Gaussian mixture, and the mixture's two-sided probability intervals are
solved numerically.  Supporting modules provide point-cloud local-map
geometry, integrity metrics and a synthetic evaluation scenario.
"""

__version__ = "0.1.0"

from .errors import (
    BracketingFailure,
    ConfigError,
    CorrectionNotPSD,
    InfeasibleContext,
    InsufficientSamples,
    LengthMismatch,
    MissingRecord,
    NoNominalRecords,
    NonConvergence,
    NotPositiveDefinite,
    PlboundsError,
    TimestepFailure,
    WeightSumViolation,
)
from .geometry import (
    CameraIntrinsics,
    CropExtents,
    DepthMap,
    PointCloud,
    Pose,
    RigidTransform,
    build_local_map,
    clean_map,
    crop_cloud,
    matrix_to_quat,
    occlusion_filter,
    pose_to_transform,
    project_to_depth_map,
    quat_conjugate,
    quat_from_axis_angle,
    quat_from_euler_zyx,
    quat_from_rotation_vector,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    quaternion_angular_distance,
    transform_cloud,
)
from .estimator import (
    ErrorEstimate,
    Estimator,
    FileEstimator,
    LossWeights,
    MeasurementContext,
    RawEstimate,
    SyntheticEstimator,
    SyntheticEstimatorConfig,
    assemble_covariance,
    gaussian_nll,
    huber_loss,
    to_vehicle_frame,
    total_loss,
    write_estimate_records,
)
from .sampling import CandidateOffset, SamplingConfig, apply_offset, sample_candidates
from .uncertainty import (
    DirectionalErrors,
    ErrorSample,
    ErrorSampleSet,
    RotationUncertainty,
    outlier_weights,
    precompute_q,
    project_directional,
    transform_error,
)
from .gmm import (
    GaussianMixture,
    ProtectionLevelQuery,
    ProtectionLevels,
    build_gmm,
    gmm_cdf,
    gmm_quantile,
    protection_level,
    protection_levels_all,
)
from .metrics import (
    AlarmLimits,
    IntegrityDiagram,
    IntegrityRecord,
    IntegrityReport,
    PerDirection,
    bound_gap,
    failure_rate,
    false_alarm_rate,
    integrity_diagram,
    records_from_table,
    summarize,
)
from .scenario import (
    Scenario,
    ScenarioConfig,
    Timestep,
    generate_city_cloud,
    generate_scenario,
    load_scenario,
    save_scenario,
    vehicle_frame_error,
)
from .pipeline import (
    VARIANTS,
    PipelineConfig,
    SequenceResult,
    TimestepResult,
    run_sequence,
    run_timestep,
)

__all__ = [
    "__version__",
    # errors
    "PlboundsError",
    "NotPositiveDefinite",
    "MissingRecord",
    "InfeasibleContext",
    "InsufficientSamples",
    "CorrectionNotPSD",
    "LengthMismatch",
    "WeightSumViolation",
    "BracketingFailure",
    "NonConvergence",
    "NoNominalRecords",
    "TimestepFailure",
    "ConfigError",
    # geometry
    "Pose",
    "RigidTransform",
    "PointCloud",
    "CameraIntrinsics",
    "CropExtents",
    "DepthMap",
    "quat_normalize",
    "quat_multiply",
    "quat_conjugate",
    "quat_to_matrix",
    "matrix_to_quat",
    "quat_from_axis_angle",
    "quat_from_rotation_vector",
    "quat_from_euler_zyx",
    "quaternion_angular_distance",
    "pose_to_transform",
    "transform_cloud",
    "crop_cloud",
    "occlusion_filter",
    "project_to_depth_map",
    "build_local_map",
    "clean_map",
    # estimator
    "RawEstimate",
    "ErrorEstimate",
    "Estimator",
    "MeasurementContext",
    "SyntheticEstimator",
    "SyntheticEstimatorConfig",
    "FileEstimator",
    "assemble_covariance",
    "to_vehicle_frame",
    "LossWeights",
    "huber_loss",
    "gaussian_nll",
    "total_loss",
    "write_estimate_records",
    # sampling
    "SamplingConfig",
    "CandidateOffset",
    "sample_candidates",
    "apply_offset",
    # uncertainty
    "RotationUncertainty",
    "precompute_q",
    "ErrorSample",
    "ErrorSampleSet",
    "transform_error",
    "outlier_weights",
    "DirectionalErrors",
    "project_directional",
    # mixture solver
    "GaussianMixture",
    "build_gmm",
    "gmm_cdf",
    "gmm_quantile",
    "protection_level",
    "protection_levels_all",
    "ProtectionLevelQuery",
    "ProtectionLevels",
    # metrics
    "AlarmLimits",
    "PerDirection",
    "IntegrityRecord",
    "IntegrityReport",
    "IntegrityDiagram",
    "bound_gap",
    "failure_rate",
    "false_alarm_rate",
    "summarize",
    "integrity_diagram",
    "records_from_table",
    # scenario
    "ScenarioConfig",
    "Timestep",
    "Scenario",
    "generate_city_cloud",
    "generate_scenario",
    "save_scenario",
    "load_scenario",
    "vehicle_frame_error",
    # pipeline
    "VARIANTS",
    "PipelineConfig",
    "TimestepResult",
    "SequenceResult",
    "run_timestep",
    "run_sequence",
]
