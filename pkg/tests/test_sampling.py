import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plbounds.geometry import Pose, quat_to_matrix
from plbounds.sampling import CandidateOffset, SamplingConfig, apply_offset, sample_candidates


def test_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(t_max=0.0)
    with pytest.raises(ValueError):
        SamplingConfig(r_max=0.0)
    with pytest.raises(ValueError):
        SamplingConfig(r_max=math.pi)
    with pytest.raises(ValueError):
        SamplingConfig(n_candidates=1)


def test_first_candidate_is_the_estimate():
    offsets = sample_candidates(SamplingConfig(), 0)
    assert len(offsets) == 24
    assert np.array_equal(offsets[0].translation, np.zeros(3))
    assert np.array_equal(offsets[0].rotation, [1.0, 0.0, 0.0, 0.0])
    without = sample_candidates(SamplingConfig(include_estimate=False, n_candidates=10), 0)
    assert len(without) == 10
    assert not np.array_equal(without[0].translation, np.zeros(3))


def test_reference_stream_is_stable():
    # pinned outputs of the PCG64 stream for seed 0; a change here breaks
    # reproducibility of every archived run
    offsets = sample_candidates(SamplingConfig(), 0)
    assert np.allclose(
        offsets[1].translation,
        [0.2739233746429086, -0.4604265724722594, -0.9180529521276106],
        rtol=0.0,
        atol=0.0,
    )
    assert np.allclose(
        offsets[1].rotation,
        [0.9986353398329181, -0.03481376680763609, 0.009969396072234746, 0.03763071643499003],
        rtol=0.0,
        atol=1e-15,
    )
    assert np.allclose(
        offsets[2].translation,
        [-0.9669447289429418, 0.6265404784005448, 0.8255111545554434],
        rtol=0.0,
        atol=0.0,
    )


def test_determinism_and_seed_sensitivity():
    a = sample_candidates(SamplingConfig(), [3, 2, 7])
    b = sample_candidates(SamplingConfig(), [3, 2, 7])
    for x, y in zip(a, b):
        assert np.array_equal(x.translation, y.translation)
        assert np.array_equal(x.rotation, y.rotation)
    c = sample_candidates(SamplingConfig(), [3, 2, 8])
    assert not np.array_equal(a[1].translation, c[1].translation)


def test_offsets_respect_bounds():
    cfg = SamplingConfig(t_max=0.5, r_max=math.radians(3.0), n_candidates=64)
    for off in sample_candidates(cfg, 5):
        assert np.all(np.abs(off.translation) <= cfg.t_max)
        assert math.isclose(float(np.linalg.norm(off.rotation)), 1.0, abs_tol=1e-12)
        # three composed per-axis angles can sum to at most 3 r_max
        w = min(1.0, abs(off.rotation[0]))
        assert 2.0 * math.acos(w) <= 3.0 * cfg.r_max + 1e-9


def test_apply_offset_pure_translation():
    rng = np.random.default_rng(0)
    q = rng.normal(size=4)
    pose = Pose(rng.normal(size=3), q / np.linalg.norm(q))
    t = np.array([0.3, -0.7, 0.2])
    moved = apply_offset(pose, CandidateOffset(t, np.array([1.0, 0.0, 0.0, 0.0])))
    assert np.allclose(moved.position, pose.position + t, atol=1e-15)
    assert np.array_equal(moved.orientation, pose.orientation)


def test_apply_offset_zero_is_identity():
    pose = Pose(np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    moved = apply_offset(pose, CandidateOffset.zero())
    assert np.array_equal(moved.position, pose.position)
    assert np.array_equal(moved.orientation, pose.orientation)


def test_offset_inverse_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.normal(size=4)
        pose = Pose(rng.normal(size=3), q / np.linalg.norm(q))
        oq = rng.normal(size=4)
        off = CandidateOffset(rng.normal(size=3), oq / np.linalg.norm(oq))
        back = apply_offset(apply_offset(pose, off), off.inverse())
        assert np.allclose(back.position, pose.position, atol=1e-12)
        assert np.allclose(back.orientation, pose.orientation, atol=1e-12)


def test_offset_shifts_sensor_center_in_sensor_frame():
    # a pure translation offset moves the sensor center by -R.T t in map
    # coordinates: the offset acts in the sensor frame
    rng = np.random.default_rng(2)
    q = rng.normal(size=4)
    pose = Pose(rng.normal(size=3), q / np.linalg.norm(q))
    t = np.array([1.0, 0.0, 0.0])
    moved = apply_offset(pose, CandidateOffset(t, np.array([1.0, 0.0, 0.0, 0.0])))
    r = quat_to_matrix(pose.orientation)
    center = -r.T @ pose.position
    center_moved = -quat_to_matrix(moved.orientation).T @ moved.position
    assert np.allclose(center_moved, center - r.T @ t, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_candidate_count_and_uniqueness(seed, n):
    offsets = sample_candidates(SamplingConfig(n_candidates=n), seed)
    assert len(offsets) == n
    flat = {tuple(o.translation) for o in offsets}
    assert len(flat) == n  # continuous draws collide with probability zero
