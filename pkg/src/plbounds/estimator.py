"""Candidate-state error estimators and their raw-output algebra.

An estimator looks at a measurement context and a candidate pose and reports
how far that candidate sits from the true state: a translation error with
per-axis scale and correlation terms, and a rotation error quaternion.  The
package ships two implementations behind one protocol: a synthetic oracle
that derives the error from the scenario's true pose and adds configurable
noise, and a file-backed lookup for precomputed outputs of an external
model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InfeasibleContext, MissingRecord, NotPositiveDefinite
from .geometry import (
    PointCloud,
    Pose,
    matrix_to_quat,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    quaternion_angular_distance,
)


@dataclass(frozen=True)
class RawEstimate:
    """Estimator output in the frame of the evaluated candidate.

    ``translation_error`` is the candidate's displacement from the true
    state expressed in the candidate frame, ``rotation_error`` the unit
    quaternion taking the true orientation to the candidate orientation.
    ``sigma`` holds per-axis standard deviations and ``corr`` the
    correlation coefficients (xy, xz, yz) of the translation error.
    """

    translation_error: np.ndarray
    rotation_error: np.ndarray
    sigma: np.ndarray
    corr: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.translation_error, dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        c = np.asarray(self.corr, dtype=float)
        if t.shape != (3,) or s.shape != (3,) or c.shape != (3,):
            raise ValueError("translation_error, sigma and corr must be 3-vectors")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation_error must be finite")
        if not np.all(s > 0.0):
            raise ValueError("sigma must be strictly positive")
        if np.any(np.abs(c) >= 1.0):
            raise ValueError("correlations must lie in (-1, 1)")
        object.__setattr__(self, "translation_error", t)
        object.__setattr__(self, "rotation_error", quat_normalize(self.rotation_error))
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "corr", c)


def assemble_covariance(sigma: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """Covariance from per-axis scales and correlations (xy, xz, yz).

    Raises NotPositiveDefinite when the resulting matrix has no Cholesky
    factorization; there is no slack, borderline inputs are rejected.
    """
    sigma = np.asarray(sigma, dtype=float)
    corr = np.asarray(corr, dtype=float)
    cov = np.diag(sigma**2)
    cov[0, 1] = cov[1, 0] = corr[0] * sigma[0] * sigma[1]
    cov[0, 2] = cov[2, 0] = corr[1] * sigma[0] * sigma[2]
    cov[1, 2] = cov[2, 1] = corr[2] * sigma[1] * sigma[2]
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"correlations {corr.tolist()} give an indefinite covariance") from exc
    return cov


@dataclass(frozen=True)
class ErrorEstimate:
    """A candidate's error expressed in the vehicle frame."""

    translation_error: np.ndarray
    covariance: np.ndarray
    rotation_error: np.ndarray


def to_vehicle_frame(raw: RawEstimate) -> ErrorEstimate:
    """Rotate a raw estimate out of the candidate frame.

    The vehicle-frame error is ``-R.T @ translation_error`` with R the
    rotation-error matrix, and the covariance is conjugated accordingly.
    """
    r = quat_to_matrix(raw.rotation_error)
    cov = assemble_covariance(raw.sigma, raw.corr)
    vehicle_cov = r.T @ cov @ r
    vehicle_cov = 0.5 * (vehicle_cov + vehicle_cov.T)
    return ErrorEstimate(-r.T @ raw.translation_error, vehicle_cov, raw.rotation_error)


# ---------------------------------------------------------------------------
# training losses


@dataclass(frozen=True)
class LossWeights:
    alpha_huber: float = 1.0
    alpha_mle: float = 1.0
    alpha_angular: float = 1.0


def huber_loss(residual: np.ndarray, delta: float = 1.0) -> float:
    """Per-dimension Huber penalty, summed: quadratic inside ``delta``,
    linear outside."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    r = np.abs(np.asarray(residual, dtype=float))
    return float(np.sum(np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))))


def gaussian_nll(residual: np.ndarray, covariance: np.ndarray) -> float:
    """Negative log-likelihood of a residual under a zero-mean Gaussian,
    without the constant term: ``0.5 log|S| + 0.5 e' S^-1 e``."""
    cov = np.asarray(covariance, dtype=float)
    e = np.asarray(residual, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance in likelihood loss is indefinite") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    y = np.linalg.solve(chol, e)
    return 0.5 * logdet + 0.5 * float(y @ y)


def total_loss(
    pred: RawEstimate,
    target_translation: np.ndarray,
    target_rotation: np.ndarray,
    weights: LossWeights = LossWeights(),
    delta: float = 1.0,
) -> float:
    """Weighted sum of Huber, Gaussian-likelihood and angular penalties."""
    e = pred.translation_error - np.asarray(target_translation, dtype=float)
    cov = assemble_covariance(pred.sigma, pred.corr)
    angular = quaternion_angular_distance(np.asarray(target_rotation, dtype=float), pred.rotation_error)
    return (
        weights.alpha_huber * huber_loss(e, delta)
        + weights.alpha_mle * gaussian_nll(e, cov)
        + weights.alpha_angular * angular
    )


# ---------------------------------------------------------------------------
# estimator implementations


@dataclass(frozen=True)
class MeasurementContext:
    """What the estimator may look at for one timestep.

    ``true_pose`` is only populated by synthetic scenarios; the file-backed
    estimator instead needs ``candidate_index`` to address its records.
    """

    timestamp: float
    payload_key: str
    true_pose: Pose | None = None
    candidate_index: int | None = None

    def for_candidate(self, index: int) -> "MeasurementContext":
        return replace(self, candidate_index=index)


@runtime_checkable
class Estimator(Protocol):
    def estimate(self, ctx: MeasurementContext, candidate: Pose, cloud: PointCloud | None) -> RawEstimate:
        ...


def _float_key(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


def _call_generator(seed: int, ctx: MeasurementContext, candidate: Pose) -> np.random.Generator:
    """Deterministic per-call stream keyed by seed, timestamp and candidate.

    The candidate enters through its index when the caller assigned one,
    otherwise through the bits of its pose, so results depend on which
    candidate is evaluated but never on evaluation order or thread count.
    """
    key = [seed, _float_key(ctx.timestamp)]
    if ctx.candidate_index is not None:
        key.append(int(ctx.candidate_index))
    else:
        key.extend(_float_key(v) for v in candidate.position)
        key.extend(_float_key(v) for v in candidate.orientation)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def _rotvecs_to_quats(rotvecs: np.ndarray) -> np.ndarray:
    angles = np.linalg.norm(rotvecs, axis=1)
    quats = np.zeros((rotvecs.shape[0], 4))
    quats[:, 0] = np.cos(0.5 * angles)
    nz = angles > 0.0
    quats[nz, 1:] = np.sin(0.5 * angles[nz])[:, None] * rotvecs[nz] / angles[nz, None]
    quats[~nz, 0] = 1.0
    return quats


@dataclass(frozen=True)
class SyntheticEstimatorConfig:
    seed: int = 0
    sigma_noise: tuple[float, float, float] = (0.1, 0.1, 0.1)
    sigma_rot: float = 0.01
    miscalibration: float = 1.0
    corr: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma_floor: float = 1e-6

    def __post_init__(self) -> None:
        if min(self.sigma_noise) < 0.0 or self.sigma_rot < 0.0:
            raise ValueError("noise scales must be non-negative")
        if self.miscalibration <= 0.0 or self.sigma_floor <= 0.0:
            raise ValueError("miscalibration and sigma_floor must be positive")


class SyntheticEstimator:
    """Oracle that reads the true pose from the context and perturbs it.

    The noiseless output is exact: the reported translation error is the
    candidate's displacement from the true state in the candidate frame and
    the rotation error is the relative orientation.  Gaussian noise with
    per-axis scale ``sigma_noise`` (and an axis-angle perturbation with
    scale ``sigma_rot``) is layered on top; the reported sigma is the noise
    scale times ``miscalibration``, so values below 1 simulate an
    overconfident model.
    """

    def __init__(self, config: SyntheticEstimatorConfig = SyntheticEstimatorConfig()):
        self.config = config
        self._sigma_noise = np.asarray(config.sigma_noise, dtype=float)
        self._sigma_report = np.maximum(self._sigma_noise * config.miscalibration, config.sigma_floor)
        self._corr = np.asarray(config.corr, dtype=float)

    def estimate(self, ctx: MeasurementContext, candidate: Pose, cloud: PointCloud | None = None) -> RawEstimate:
        if ctx.true_pose is None:
            raise InfeasibleContext("synthetic estimator needs the true pose in the context")
        r_true = quat_to_matrix(ctx.true_pose.orientation)
        r_cand = quat_to_matrix(candidate.orientation)
        center_true = -r_true.T @ ctx.true_pose.position
        center_cand = -r_cand.T @ candidate.position
        translation = r_cand @ (center_cand - center_true)
        rotation = matrix_to_quat(r_cand @ r_true.T)

        rng = _call_generator(self.config.seed, ctx, candidate)
        noise = rng.normal(0.0, self._sigma_noise)
        rotvec = rng.normal(0.0, self.config.sigma_rot, 3)
        if self.config.sigma_rot > 0.0:
            rotation = quat_normalize(quat_multiply(_rotvecs_to_quats(rotvec[None, :])[0], rotation))
        return RawEstimate(translation + noise, rotation, self._sigma_report, self._corr)

    def rotation_residual_samples(self, count: int, seed: int) -> np.ndarray:
        """Draws from the same rotation-perturbation distribution the
        estimator applies to its outputs, as scalar-first quaternions."""
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x726F74])))
        return _rotvecs_to_quats(rng.normal(0.0, self.config.sigma_rot, (count, 3)))


class FileEstimator:
    """Lookup of precomputed estimates keyed by (payload_key, candidate_index).

    The backing file is JSON-lines; each line holds payload_key,
    candidate_index, translation_error, rotation_error, sigma and corr.
    The table is loaded once and read-only afterwards.
    """

    def __init__(self, path: Path | str):
        from .io import read_jsonl

        self._records: dict[tuple[str, int], RawEstimate] = {}
        for row in read_jsonl(path):
            key = (str(row["payload_key"]), int(row["candidate_index"]))
            self._records[key] = RawEstimate(
                np.asarray(row["translation_error"], dtype=float),
                np.asarray(row["rotation_error"], dtype=float),
                np.asarray(row["sigma"], dtype=float),
                np.asarray(row["corr"], dtype=float),
            )

    def __len__(self) -> int:
        return len(self._records)

    def estimate(self, ctx: MeasurementContext, candidate: Pose, cloud: PointCloud | None = None) -> RawEstimate:
        if ctx.candidate_index is None:
            raise InfeasibleContext("file-backed estimator needs a candidate index in the context")
        key = (ctx.payload_key, int(ctx.candidate_index))
        try:
            return self._records[key]
        except KeyError:
            raise MissingRecord(f"no estimate recorded for {key}") from None


def write_estimate_records(rows, path: Path | str) -> None:
    """Serialize (payload_key, candidate_index, RawEstimate) triples to the
    JSON-lines format the file-backed estimator reads."""
    from .io import write_jsonl

    out = []
    for payload_key, candidate_index, raw in rows:
        out.append(
            {
                "payload_key": str(payload_key),
                "candidate_index": int(candidate_index),
                "translation_error": [float(v) for v in raw.translation_error],
                "rotation_error": [float(v) for v in raw.rotation_error],
                "sigma": [float(v) for v in raw.sigma],
                "corr": [float(v) for v in raw.corr],
            }
        )
    write_jsonl(out, path)
