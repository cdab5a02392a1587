import numpy as np
import pytest

from plbounds.errors import CorrectionNotPSD, InsufficientSamples
from plbounds.estimator import ErrorEstimate
from plbounds.geometry import quat_from_euler_zyx, quat_to_matrix
from plbounds.uncertainty import (
    MIN_ROTATION_SAMPLES,
    ROBUST_GAMMA,
    DirectionalErrors,
    ErrorSample,
    ErrorSampleSet,
    RotationUncertainty,
    outlier_weights,
    precompute_q,
    project_directional,
    transform_error,
)

import oracles


def _perturbation_quats(rng, n, scale=0.05):
    rotvecs = rng.normal(0.0, scale, size=(n, 3))
    angles = np.linalg.norm(rotvecs, axis=1)
    quats = np.zeros((n, 4))
    quats[:, 0] = np.cos(0.5 * angles)
    quats[:, 1:] = np.sin(0.5 * angles)[:, None] * rotvecs / angles[:, None]
    return quats


# ---------------------------------------------------------------------------
# the rotation-uncertainty tensor


def test_precompute_q_matches_loop_oracle():
    rng = np.random.default_rng(0)
    quats = _perturbation_quats(rng, 1000)
    got = precompute_q(quats).q
    want = oracles.q_tensor(quats)
    assert np.allclose(got, want, rtol=0.0, atol=1e-12)


def test_precompute_q_rejects_small_samples():
    rng = np.random.default_rng(1)
    with pytest.raises(InsufficientSamples):
        precompute_q(_perturbation_quats(rng, MIN_ROTATION_SAMPLES - 1))
    precompute_q(_perturbation_quats(rng, MIN_ROTATION_SAMPLES))  # boundary passes


def test_precompute_q_identity_rotations_give_zero():
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (1000, 1))
    assert np.array_equal(precompute_q(quats).q, np.zeros((3, 3, 3, 3)))


def test_rotation_uncertainty_validation():
    with pytest.raises(ValueError):
        RotationUncertainty(np.zeros((3, 3, 3)))
    bad = np.zeros((3, 3, 3, 3))
    bad[0, 1, 0, 0] = 1.0  # breaks q[i,j] == q[j,i].T
    with pytest.raises(ValueError):
        RotationUncertainty(bad)
    assert np.array_equal(RotationUncertainty.zero().q, np.zeros((3, 3, 3, 3)))


# ---------------------------------------------------------------------------
# transforming candidate errors


def _estimate(error, cov, rotation=(1.0, 0.0, 0.0, 0.0)):
    return ErrorEstimate(np.asarray(error, float), np.asarray(cov, float), np.asarray(rotation, float))


def test_transform_error_identity_rotation_shifts_mean():
    est = _estimate([1.0, 2.0, 3.0], np.diag([0.1, 0.2, 0.3]))
    sample = transform_error(est, np.array([0.5, 0.5, 0.5]), RotationUncertainty.zero())
    assert np.allclose(sample.error, [0.5, 1.5, 2.5])
    assert np.allclose(sample.covariance, np.diag([0.1, 0.2, 0.3]))


def test_transform_error_rotates_the_offset():
    # rotation error is a +90 degree yaw, so the offset x-hat maps through
    # R.T to -y-hat and the sample error is +y-hat
    yaw90 = quat_from_euler_zyx(np.pi / 2, 0.0, 0.0)
    est = _estimate([0.0, 0.0, 0.0], np.eye(3), yaw90)
    sample = transform_error(est, np.array([1.0, 0.0, 0.0]), RotationUncertainty.zero())
    assert np.allclose(sample.error, [0.0, 1.0, 0.0], atol=1e-12)


def test_transform_error_correction_matches_outer_product_oracle():
    # u' q[i,j] u must equal the mean outer product of (R - I) u over the
    # exact same quaternion sample
    rng = np.random.default_rng(2)
    quats = _perturbation_quats(rng, 1000, scale=0.1)
    tensor = precompute_q(quats)
    for _ in range(5):
        t = rng.normal(size=3) * 2.0
        est = _estimate(rng.normal(size=3), np.eye(3))
        sample = transform_error(est, t, tensor)
        want = np.eye(3) + oracles.correction_matrix(quats, t)  # identity rotation: u = t
        assert np.allclose(sample.covariance, 0.5 * (want + want.T), atol=1e-10)


def test_transform_error_correction_inflates_variance():
    rng = np.random.default_rng(3)
    tensor = precompute_q(_perturbation_quats(rng, 2000, scale=0.1))
    est = _estimate([0.0, 0.0, 0.0], np.diag([0.01, 0.01, 0.01]))
    t = np.array([2.0, -1.0, 0.5])
    inflated = transform_error(est, t, tensor)
    baseline = transform_error(est, t, RotationUncertainty.zero())
    assert np.all(np.diagonal(inflated.covariance) >= np.diagonal(baseline.covariance))
    assert np.diagonal(inflated.covariance).max() > 0.01


def test_transform_error_rejects_indefinite_covariance():
    est = _estimate([0.0, 0.0, 0.0], np.diag([-1.0, 1.0, 1.0]))
    with pytest.raises(CorrectionNotPSD):
        transform_error(est, np.zeros(3), RotationUncertainty.zero())


def test_transform_error_validates_offset_shape():
    est = _estimate([0.0, 0.0, 0.0], np.eye(3))
    with pytest.raises(ValueError):
        transform_error(est, np.zeros(2), RotationUncertainty.zero())


# ---------------------------------------------------------------------------
# robust weights


def test_outlier_weights_reference_case():
    w = outlier_weights(np.array([[1.0], [2.0], [3.0], [4.0], [100.0]]))[:, 0]
    want = [
        0.1138994656666143,
        0.22359048331944706,
        0.43891956769449153,
        0.22359048331944706,
        1.6905071911849278e-29,
    ]
    assert np.allclose(w, want, rtol=0.0, atol=1e-16)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_outlier_weights_mad_fallback_case():
    # more than half the column identical: MAD is zero, the mean absolute
    # deviation takes over
    w = outlier_weights(np.array([[0.0], [0.0], [0.0], [1.0], [5.0]]))[:, 0]
    want = [
        0.27546690155708725,
        0.27546690155708725,
        0.27546690155708725,
        0.15702172137784817,
        0.016577573950890205,
    ]
    assert np.allclose(w, want, rtol=0.0, atol=1e-16)


def test_outlier_weights_uniform_when_identical():
    w = outlier_weights(np.full((5, 3), 2.5))
    assert np.array_equal(w, np.full((5, 3), 0.2))


def test_outlier_weights_matches_pure_python_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        col = rng.normal(size=rng.integers(2, 30))
        got = outlier_weights(col[:, None])[:, 0]
        want = oracles.robust_weights(col, gamma=ROBUST_GAMMA)
        assert np.allclose(got, want, rtol=0.0, atol=1e-14)


def test_outlier_weights_columns_independent():
    rng = np.random.default_rng(5)
    e = rng.normal(size=(12, 3))
    w = outlier_weights(e)
    for d in range(3):
        assert np.allclose(w[:, d], outlier_weights(e[:, d : d + 1])[:, 0])


def test_outlier_weights_monotone_in_deviation():
    col = np.array([0.0, 0.1, 0.5, 2.0, 10.0])
    w = outlier_weights(col[:, None])[:, 0]
    dev = np.abs(col - np.median(col))
    order = np.argsort(dev)
    assert np.all(np.diff(w[order]) < 0.0)  # larger deviation, smaller weight


def test_outlier_weights_validation():
    with pytest.raises(ValueError):
        outlier_weights(np.zeros(3))  # one-dimensional
    with pytest.raises(ValueError):
        outlier_weights(np.zeros((0, 3)))


# ---------------------------------------------------------------------------
# sample sets and directional projection


def test_error_sample_set_validation():
    with pytest.raises(ValueError):
        ErrorSampleSet(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))  # zero variance
    with pytest.raises(ValueError):
        ErrorSampleSet(np.zeros((3, 2)), np.ones((3, 2)), np.ones((3, 2)))


def test_error_sample_set_from_samples():
    samples = [
        ErrorSample(np.array([1.0, 2.0, 3.0]), np.diag([0.1, 0.2, 0.3])),
        ErrorSample(np.array([4.0, 5.0, 6.0]), np.diag([0.4, 0.5, 0.6])),
    ]
    s = ErrorSampleSet.from_samples(samples, np.full((2, 3), 0.5))
    assert np.array_equal(s.means, [[1, 2, 3], [4, 5, 6]])
    assert np.allclose(s.variances, [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])


def _sample_set(ex, ey, ez, w=None):
    n = len(ex)
    means = np.column_stack([ex, ey, ez])
    variances = np.full((n, 3), 0.04)
    weights = np.full((n, 3), 1.0 / n) if w is None else w
    return ErrorSampleSet(means, variances, weights)


def test_project_directional_known_angle():
    # all errors on the 3-4-5 direction: theta = atan2(4, 3), and both
    # halves project to the same magnitude 5
    n = 4
    s = _sample_set([3.0] * n, [4.0] * n, [1.0] * n)
    proj = project_directional(s)
    assert np.isclose(proj.theta, np.arctan2(4.0, 3.0))
    assert proj.excluded is None
    assert np.allclose(proj.horizontal_means, 5.0)
    assert np.allclose(proj.horizontal_weights, 0.5 / n)
    assert np.isclose(proj.horizontal_weights.sum(), 1.0)
    # variances scale with the squared direction cosines
    assert np.allclose(proj.horizontal_variances[:n], 0.04 / 0.36)
    assert np.allclose(proj.horizontal_variances[n:], 0.04 / 0.64)
    assert np.allclose(proj.vertical_means, 1.0)


def test_project_directional_excludes_degenerate_axis():
    n = 3
    s = _sample_set([0.0] * n, [2.0] * n, [-1.0] * n)
    proj = project_directional(s)
    assert proj.excluded == "x"
    assert np.allclose(proj.horizontal_means, 2.0)
    assert np.isclose(proj.horizontal_weights.sum(), 1.0)
    s = _sample_set([2.0] * n, [0.0] * n, [1.0] * n)
    proj = project_directional(s)
    assert proj.excluded == "y"
    assert np.allclose(proj.horizontal_means, 2.0)


def test_project_directional_vertical_passthrough():
    s = _sample_set([1.0, 1.0], [1.0, 1.0], [-3.0, 2.0])
    proj = project_directional(s)
    assert np.array_equal(proj.vertical_means, [3.0, 2.0])
    assert np.array_equal(proj.vertical_variances, s.variances[:, 2])
    assert np.array_equal(proj.vertical_weights, s.weights[:, 2])
