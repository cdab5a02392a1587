"""Turning per-candidate estimates into weighted error samples.

Three steps happen between the estimator and the mixture model:

1. Each candidate's vehicle-frame error is shifted by the rotated candidate
   offset, so every sample measures the error of the *state estimate*, and
   its covariance is inflated for the uncertainty of that rotation.
2. Robust per-dimension weights down-rank samples whose error disagrees
   with the bulk (median absolute deviation scoring, softmax weighting).
3. Optionally the horizontal samples are projected onto the direction the
   weighted errors point in, giving one horizontal and one vertical set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CorrectionNotPSD, InsufficientSamples
from .estimator import ErrorEstimate
from .geometry import quat_to_matrix

# inverse standard-normal CDF at 3/4: one robust-Z unit equals one
# probable error, the customary consistency constant for MAD scoring
ROBUST_GAMMA = 0.6745

MIN_ROTATION_SAMPLES = 1000


@dataclass(frozen=True)
class RotationUncertainty:
    """Second moments of the rows of (R' - I) over a rotation-residual
    distribution, as a (3, 3, 3, 3) tensor: ``q[i, j]`` is
    ``E[row_i(R'-I) outer row_j(R'-I)]``."""

    q: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        if q.shape != (3, 3, 3, 3):
            raise ValueError("rotation uncertainty tensor must have shape (3, 3, 3, 3)")
        if not np.all(np.isfinite(q)):
            raise ValueError("rotation uncertainty tensor must be finite")
        sym = np.abs(q - np.transpose(q, (1, 0, 3, 2))).max()
        if sym > 1e-9:
            raise ValueError(f"tensor violates block symmetry by {sym:.2e}")
        object.__setattr__(self, "q", q)

    @classmethod
    def zero(cls) -> "RotationUncertainty":
        return cls(np.zeros((3, 3, 3, 3)))


def precompute_q(rotation_samples: np.ndarray, min_samples: int = MIN_ROTATION_SAMPLES) -> RotationUncertainty:
    """Estimate the rotation-uncertainty tensor from residual quaternions.

    ``rotation_samples`` is an (M, 4) array of scalar-first unit quaternions
    drawn from the rotation-residual distribution of the estimator.
    """
    samples = np.asarray(rotation_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 4:
        raise ValueError("rotation samples must be an (M, 4) quaternion array")
    if samples.shape[0] < min_samples:
        raise InsufficientSamples(
            f"need at least {min_samples} rotation samples, got {samples.shape[0]}"
        )
    mats = np.empty((samples.shape[0], 3, 3))
    for idx, quat in enumerate(samples):
        mats[idx] = quat_to_matrix(quat)
    mats -= np.eye(3)
    q = np.einsum("mia,mjb->ijab", mats, mats) / samples.shape[0]
    return RotationUncertainty(q)


@dataclass(frozen=True)
class ErrorSample:
    """One candidate's contribution to the mixture: the estimate's error as
    seen from that candidate, with the inflated covariance."""

    error: np.ndarray
    covariance: np.ndarray


def transform_error(
    candidate_estimate: ErrorEstimate,
    offset_translation: np.ndarray,
    rotation_uncertainty: RotationUncertainty,
) -> ErrorSample:
    """Shift a candidate's error by its known offset and inflate the covariance.

    With R the candidate's rotation-error matrix and t the offset that
    generated the candidate, the sample mean is ``error - R.T t`` and each
    covariance entry grows by ``u' q[i, j] u`` for ``u = R.T t``.
    """
    t = np.asarray(offset_translation, dtype=float)
    if t.shape != (3,):
        raise ValueError("offset translation must be a 3-vector")
    r = quat_to_matrix(candidate_estimate.rotation_error)
    u = r.T @ t
    correction = np.einsum("a,ijab,b->ij", u, rotation_uncertainty.q, u)
    cov = candidate_estimate.covariance + correction
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CorrectionNotPSD("corrected covariance is not positive definite") from exc
    return ErrorSample(candidate_estimate.translation_error - u, cov)


# ---------------------------------------------------------------------------
# robust weights


def outlier_weights(errors: np.ndarray, gamma: float = ROBUST_GAMMA) -> np.ndarray:
    """Per-dimension softmax weights that de-emphasize outlying samples.

    Each column is scored by its absolute deviation from the column median,
    scaled by the median of those deviations; weights are
    ``softmax(-gamma * score)``.  When every deviation is zero the weights
    are uniform; when only the median deviation collapses (more than half
    the samples identical) the mean absolute deviation takes over as scale.
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim != 2 or e.shape[0] < 1:
        raise ValueError("errors must be (N, dims) with N >= 1")
    weights = np.empty_like(e)
    for d in range(e.shape[1]):
        col = e[:, d]
        dev = np.abs(col - np.median(col))
        mad = float(np.median(dev))
        if mad == 0.0:
            fallback = float(dev.mean())
            if fallback == 0.0:
                weights[:, d] = 1.0 / col.size
                continue
            score = dev / fallback
        else:
            score = dev / mad
        logits = -gamma * score
        logits -= logits.max()
        ex = np.exp(logits)
        weights[:, d] = ex / ex.sum()
    return weights


@dataclass(frozen=True)
class ErrorSampleSet:
    """Per-dimension mixture ingredients: sample means, variances and weights,
    each of shape (N, 3) for the lateral/longitudinal/vertical axes."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (m.shape == v.shape == w.shape) or m.ndim != 2 or m.shape[1] != 3:
            raise ValueError("means, variances and weights must share shape (N, 3)")
        if np.any(v <= 0.0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, samples: list[ErrorSample], weights: np.ndarray) -> "ErrorSampleSet":
        means = np.array([s.error for s in samples])
        variances = np.array([np.diagonal(s.covariance) for s in samples])
        return cls(means, variances, np.asarray(weights, dtype=float))


# ---------------------------------------------------------------------------
# directional projection


@dataclass(frozen=True)
class DirectionalErrors:
    """Samples projected onto the dominant horizontal error direction.

    ``excluded`` names the horizontal dimension dropped because the
    direction was too close to one axis ('x', 'y' or None).
    """

    theta: float
    horizontal_means: np.ndarray
    horizontal_variances: np.ndarray
    horizontal_weights: np.ndarray
    vertical_means: np.ndarray
    vertical_variances: np.ndarray
    vertical_weights: np.ndarray
    excluded: str | None


def project_directional(samples: ErrorSampleSet, direction_floor: float = 0.05) -> DirectionalErrors:
    """Project the x/y sample sets onto the weighted mean error direction.

    The direction angle is ``atan2(w_y . e_y, w_x . e_x)``.  Magnitudes are
    scaled by 1/cos and 1/sin, variances by their squares, and the two
    halves carry half their original weight each.  A half whose direction
    cosine falls below ``direction_floor`` is excluded and the remaining
    weights renormalized; the vertical set passes through with magnitudes
    taken absolute.
    """
    ex, ey, ez = samples.means[:, 0], samples.means[:, 1], samples.means[:, 2]
    vx, vy, vz = samples.variances[:, 0], samples.variances[:, 1], samples.variances[:, 2]
    wx, wy, wz = samples.weights[:, 0], samples.weights[:, 1], samples.weights[:, 2]
    theta = math.atan2(float(wy @ ey), float(wx @ ex))
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) < direction_floor:
        h_means, h_vars, h_weights, excluded = np.abs(ey / s), vy / s**2, wy, "x"
    elif abs(s) < direction_floor:
        h_means, h_vars, h_weights, excluded = np.abs(ex / c), vx / c**2, wx, "y"
    else:
        h_means = np.concatenate((np.abs(ex / c), np.abs(ey / s)))
        h_vars = np.concatenate((vx / c**2, vy / s**2))
        h_weights = np.concatenate((0.5 * wx, 0.5 * wy))
        excluded = None
    return DirectionalErrors(
        theta=theta,
        horizontal_means=h_means,
        horizontal_variances=h_vars,
        horizontal_weights=h_weights,
        vertical_means=np.abs(ez),
        vertical_variances=vz,
        vertical_weights=wz,
        excluded=excluded,
    )
