"""End-to-end protection-level computation over scenarios.

Four pipeline variants are supported:

* ``VAR``: one estimator call at the state estimate; per-axis Gaussians
  from the reported error and variance.
* ``VAR_E``: candidate states sampled around the estimate, every sample
  weighted equally in the mixture.
* ``VAR_EO``: candidate sampling plus robust outlier weighting.
* ``VAR_EO_DIRECTIONAL``: as ``VAR_EO``, with the horizontal samples
  projected onto the dominant error direction before solving; the
  horizontal bound is reported for both the lateral and longitudinal axes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PlboundsError, TimestepFailure
from .estimator import Estimator, MeasurementContext, SyntheticEstimator, to_vehicle_frame
from .geometry import PointCloud, Pose
from .gmm import (
    ProtectionLevelQuery,
    ProtectionLevels,
    build_gmm,
    protection_level,
    protection_levels_all,
)
from .metrics import (
    AlarmLimits,
    IntegrityDiagram,
    IntegrityRecord,
    IntegrityReport,
    integrity_diagram,
    summarize,
)
from .sampling import CandidateOffset, SamplingConfig, apply_offset, sample_candidates
from .scenario import Scenario, vehicle_frame_error
from .uncertainty import (
    ErrorSampleSet,
    RotationUncertainty,
    outlier_weights,
    precompute_q,
    project_directional,
    transform_error,
)

VARIANTS = ("VAR", "VAR_E", "VAR_EO", "VAR_EO_DIRECTIONAL")


@dataclass(frozen=True)
class PipelineConfig:
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    query: ProtectionLevelQuery = field(default_factory=ProtectionLevelQuery)
    limits: AlarmLimits = field(default_factory=AlarmLimits)
    variant: str = "VAR_EO"
    seed: int = 0
    threads: int = 1
    min_candidates: int = 2
    q_samples: int = 100000
    diagram_bins: int = 40

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.min_candidates < 2:
            raise ValueError("min_candidates must be at least 2")


@dataclass(frozen=True)
class TimestepResult:
    timestamp: float
    pl: ProtectionLevels
    n_candidates: int
    n_excluded: int
    samples: ErrorSampleSet
    diagnostics: tuple[str, ...] = ()
    direction_theta: float | None = None
    direction_excluded: str | None = None
    index: int = -1


def run_timestep(
    estimator: Estimator,
    ctx: MeasurementContext,
    estimate_pose: Pose,
    cloud: PointCloud | None,
    offsets: list[CandidateOffset],
    rotation_uncertainty: RotationUncertainty,
    config: PipelineConfig,
) -> TimestepResult:
    """Protection levels for one timestep under the configured variant.

    Candidates whose estimator call raises a package error are excluded
    with a diagnostic; fewer than ``min_candidates`` survivors abort the
    timestep.  Results do not depend on candidate evaluation order.
    """
    if config.variant == "VAR":
        raw = estimator.estimate(ctx.for_candidate(0), estimate_pose, cloud)
        est = to_vehicle_frame(raw)
        samples = ErrorSampleSet(
            est.translation_error[None, :],
            np.diagonal(est.covariance)[None, :].copy(),
            np.ones((1, 3)),
        )
        pls = protection_levels_all(samples.means, samples.variances, samples.weights, config.query)
        return TimestepResult(ctx.timestamp, pls, 1, 0, samples)

    collected = []
    diagnostics = []
    for i, offset in enumerate(offsets):
        candidate = apply_offset(estimate_pose, offset)
        try:
            raw = estimator.estimate(ctx.for_candidate(i), candidate, cloud)
            est = to_vehicle_frame(raw)
            collected.append(transform_error(est, offset.translation, rotation_uncertainty))
        except PlboundsError as exc:
            diagnostics.append(f"candidate {i} excluded: {exc}")
    if len(collected) < config.min_candidates:
        raise TimestepFailure(
            f"{len(collected)} usable candidates at t={ctx.timestamp} "
            f"(minimum {config.min_candidates}); {'; '.join(diagnostics)}"
        )
    means = np.array([s.error for s in collected])
    variances = np.array([np.diagonal(s.covariance) for s in collected])
    if config.variant == "VAR_E":
        weights = np.full(means.shape, 1.0 / means.shape[0])
    else:
        weights = outlier_weights(means)
    samples = ErrorSampleSet(means, variances, weights)

    theta = None
    excluded_dim = None
    if config.variant == "VAR_EO_DIRECTIONAL":
        proj = project_directional(samples)
        theta, excluded_dim = proj.theta, proj.excluded
        horizontal = protection_level(
            build_gmm(proj.horizontal_means, proj.horizontal_variances, proj.horizontal_weights),
            config.query,
        )
        vertical = protection_level(
            build_gmm(proj.vertical_means, proj.vertical_variances, proj.vertical_weights),
            config.query,
        )
        pls = ProtectionLevels(horizontal, horizontal, vertical)
    else:
        pls = protection_levels_all(means, variances, weights, config.query)
    return TimestepResult(
        timestamp=ctx.timestamp,
        pl=pls,
        n_candidates=len(collected),
        n_excluded=len(diagnostics),
        samples=samples,
        diagnostics=tuple(diagnostics),
        direction_theta=theta,
        direction_excluded=excluded_dim,
    )


@dataclass(frozen=True)
class SequenceResult:
    results: list[TimestepResult]
    records: list[IntegrityRecord]
    report: IntegrityReport
    diagram: IntegrityDiagram

    def result_rows(self) -> list[tuple]:
        rows = []
        for res, rec in zip(self.results, self.records):
            rows.append(
                (
                    res.timestamp,
                    res.pl.lateral,
                    res.pl.longitudinal,
                    res.pl.vertical,
                    rec.error[0],
                    rec.error[1],
                    rec.error[2],
                )
            )
        return rows


def default_rotation_uncertainty(estimator: Estimator, config: PipelineConfig) -> RotationUncertainty:
    """Rotation-uncertainty tensor to use when none is supplied.

    A synthetic estimator exposes its own rotation-residual distribution;
    anything else falls back to the zero tensor (no inflation).
    """
    if isinstance(estimator, SyntheticEstimator) and estimator.config.sigma_rot > 0.0:
        samples = estimator.rotation_residual_samples(config.q_samples, config.seed)
        return precompute_q(samples)
    return RotationUncertainty.zero()


def run_sequence(
    estimator: Estimator,
    scenario: Scenario,
    config: PipelineConfig,
    rotation_uncertainty: RotationUncertainty | None = None,
) -> SequenceResult:
    """Run every scenario timestep and aggregate the integrity statistics.

    Candidate offsets are redrawn per timestep from streams derived from the
    run seed and the timestep index, so results are reproducible and
    independent of the number of worker threads.
    """
    if rotation_uncertainty is None:
        rotation_uncertainty = default_rotation_uncertainty(estimator, config)

    def one(ts) -> tuple[TimestepResult, IntegrityRecord]:
        ctx = MeasurementContext(
            timestamp=ts.timestamp, payload_key=ts.payload_key, true_pose=ts.true_pose
        )
        offsets = (
            []
            if config.variant == "VAR"
            else sample_candidates(config.sampling, [config.seed, 2, ts.index])
        )
        result = run_timestep(
            estimator, ctx, ts.estimate_pose, scenario.cloud, offsets, rotation_uncertainty, config
        )
        result = replace(result, index=ts.index)
        record = IntegrityRecord(result.pl, vehicle_frame_error(ts.true_pose, ts.estimate_pose))
        return result, record

    if config.threads > 1 and len(scenario.timesteps) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            pairs = list(pool.map(one, scenario.timesteps))
    else:
        pairs = [one(ts) for ts in scenario.timesteps]
    results = [p[0] for p in pairs]
    records = [p[1] for p in pairs]
    return SequenceResult(
        results=results,
        records=records,
        report=summarize(records, config.limits),
        diagram=integrity_diagram(records, config.limits, config.diagram_bins),
    )
