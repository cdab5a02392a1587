"""Synthetic driving scenarios for exercising the pipeline end to end.

The world is a grid of rectangular building blocks with vertical walls and
an optional ground plane, sampled as a point cloud.  The vehicle drives
along the first street at constant speed; pose estimates are drawn within
configurable translation and rotation offsets of the truth, mirroring the
operating regime the error estimators are built for (a couple of meters
and a few degrees).

Vehicle frame convention: x lateral (right of travel), y longitudinal
(forward), z vertical (up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .geometry import PointCloud, Pose, matrix_to_quat, quat_from_euler_zyx, quat_to_matrix
from .sampling import CandidateOffset, apply_offset


@dataclass(frozen=True)
class ScenarioConfig:
    n_timesteps: int = 100
    blocks_x: int = 3
    blocks_y: int = 3
    block_size: float = 20.0
    street_width: float = 8.0
    wall_height: float = 6.0
    wall_density: float = 10.0
    ground: bool = True
    ground_density: float = 2.0
    camera_height: float = 1.5
    speed: float = 5.0
    dt: float = 1.0
    estimate_offset_translation: float = 2.0
    estimate_offset_rotation: float = math.radians(10.0)

    def __post_init__(self) -> None:
        if self.n_timesteps < 0:
            raise ValueError("n_timesteps must be non-negative")
        if min(self.blocks_x, self.blocks_y) < 1:
            raise ValueError("need at least one block per axis")
        if min(self.block_size, self.street_width, self.wall_height, self.dt, self.speed) <= 0.0:
            raise ValueError("geometry and motion parameters must be positive")
        if min(self.wall_density, self.ground_density) < 0.0:
            raise ValueError("densities must be non-negative")
        if self.estimate_offset_translation < 0.0 or self.estimate_offset_rotation < 0.0:
            raise ValueError("estimate offsets must be non-negative")


@dataclass(frozen=True)
class Timestep:
    index: int
    timestamp: float
    payload_key: str
    true_pose: Pose
    estimate_pose: Pose


@dataclass(frozen=True)
class Scenario:
    seed: int
    cloud: PointCloud
    timesteps: list[Timestep]
    map_path: str | None = None


def wall_point_count(density: float, length: float, height: float) -> int:
    return int(round(density * length * height))


def _sample_wall(rng: np.random.Generator, count: int, origin, along, up) -> np.ndarray:
    """Uniform points on the parallelogram origin + u * along + v * up."""
    if count == 0:
        return np.empty((0, 3))
    uv = rng.uniform(0.0, 1.0, (count, 2))
    return np.asarray(origin) + uv[:, :1] * np.asarray(along) + uv[:, 1:] * np.asarray(up)


def generate_city_cloud(config: ScenarioConfig, seed: int) -> PointCloud:
    """Sample the block walls (and ground) into one point cloud.

    Point counts are density times surface area, rounded per wall; walls are
    emitted block by block in row-major order so the output is reproducible
    byte for byte.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    pitch = config.block_size + config.street_width
    up = (0.0, 0.0, config.wall_height)
    n_wall = wall_point_count(config.wall_density, config.block_size, config.wall_height)
    parts = []
    for by in range(config.blocks_y):
        for bx in range(config.blocks_x):
            x0 = config.street_width + bx * pitch
            y0 = config.street_width + by * pitch
            b = config.block_size
            walls = (
                ((x0, y0, 0.0), (b, 0.0, 0.0)),
                ((x0, y0 + b, 0.0), (b, 0.0, 0.0)),
                ((x0, y0, 0.0), (0.0, b, 0.0)),
                ((x0 + b, y0, 0.0), (0.0, b, 0.0)),
            )
            for origin, along in walls:
                parts.append(_sample_wall(rng, n_wall, origin, along, up))
    extent_x = config.street_width + config.blocks_x * pitch
    extent_y = config.street_width + config.blocks_y * pitch
    if config.ground:
        n_ground = wall_point_count(config.ground_density, extent_x, extent_y)
        parts.append(_sample_wall(rng, n_ground, (0.0, 0.0, 0.0), (extent_x, 0.0, 0.0), (0.0, extent_y, 0.0)))
    pts = np.concatenate(parts) if parts else np.empty((0, 3))
    return PointCloud(pts)


def _travel_pose(config: ScenarioConfig, timestamp: float) -> Pose:
    # drive along the first street in +x; vehicle rows are (right, forward, up)
    center = np.array(
        [config.street_width + config.speed * timestamp, 0.5 * config.street_width, config.camera_height]
    )
    r_vehicle = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return Pose(-r_vehicle @ center, matrix_to_quat(r_vehicle))


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Build the world and a timestamped trajectory with noisy pose estimates."""
    cloud = generate_city_cloud(config, seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    n = config.n_timesteps
    translations = rng.uniform(
        -config.estimate_offset_translation, config.estimate_offset_translation, (n, 3)
    )
    angles = rng.uniform(-config.estimate_offset_rotation, config.estimate_offset_rotation, (n, 3))
    timesteps = []
    for k in range(n):
        timestamp = k * config.dt
        truth = _travel_pose(config, timestamp)
        offset = CandidateOffset(
            translations[k], quat_from_euler_zyx(angles[k, 2], angles[k, 1], angles[k, 0])
        )
        timesteps.append(
            Timestep(
                index=k,
                timestamp=timestamp,
                payload_key=f"t{k:06d}",
                true_pose=truth,
                estimate_pose=apply_offset(truth, offset),
            )
        )
    return Scenario(seed=seed, cloud=cloud, timesteps=timesteps)


def vehicle_frame_error(true_pose: Pose, estimate_pose: Pose) -> np.ndarray:
    """True position error of an estimate, expressed in the true vehicle frame.

    This is the quantity the protection levels bound: the displacement of
    the estimated sensor center from the true one, rotated into the frame
    the image was captured from.
    """
    r_true = quat_to_matrix(true_pose.orientation)
    r_est = quat_to_matrix(estimate_pose.orientation)
    center_true = -r_true.T @ true_pose.position
    center_est = -r_est.T @ estimate_pose.position
    return r_true @ (center_true - center_est)


def _pose_to_dict(pose: Pose) -> dict:
    return {
        "position": [float(v) for v in pose.position],
        "orientation": [float(v) for v in pose.orientation],
    }


def _pose_from_dict(d: dict) -> Pose:
    return Pose(np.asarray(d["position"], dtype=float), np.asarray(d["orientation"], dtype=float))


def save_scenario(scenario: Scenario, out_dir: Path | str, map_format: str = "bin") -> Path:
    """Write the map cloud and the scenario document; returns the JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if map_format == "bin":
        map_name = "map.bin"
        io.write_cloud_bin(scenario.cloud, out / map_name)
    elif map_format == "xyz":
        map_name = "map.xyz"
        io.write_cloud_xyz(scenario.cloud, out / map_name)
    else:
        raise ValueError("map_format must be 'bin' or 'xyz'")
    doc = {
        "schema": 1,
        "seed": scenario.seed,
        "map": map_name,
        "timesteps": [
            {
                "index": ts.index,
                "timestamp": ts.timestamp,
                "payload_key": ts.payload_key,
                "true_pose": _pose_to_dict(ts.true_pose),
                "estimate_pose": _pose_to_dict(ts.estimate_pose),
            }
            for ts in scenario.timesteps
        ],
    }
    path = out / "scenario.json"
    io.write_json(doc, path)
    return path


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    doc = io.read_json(path)
    if doc.get("schema") != 1:
        raise ValueError(f"{path}: unsupported scenario schema {doc.get('schema')!r}")
    map_name = doc["map"]
    map_path = path.parent / map_name
    if map_name.endswith(".bin"):
        cloud = io.read_cloud_bin(map_path)
    else:
        cloud = io.read_cloud_xyz(map_path)
    timesteps = [
        Timestep(
            index=int(ts["index"]),
            timestamp=float(ts["timestamp"]),
            payload_key=str(ts["payload_key"]),
            true_pose=_pose_from_dict(ts["true_pose"]),
            estimate_pose=_pose_from_dict(ts["estimate_pose"]),
        )
        for ts in doc["timesteps"]
    ]
    return Scenario(seed=int(doc["seed"]), cloud=cloud, timesteps=timesteps, map_path=str(map_path))
