"""File formats: point clouds, depth maps, result tables and JSON documents.

All binary formats are little-endian.  JSON documents are written with
sorted keys and a fixed indentation so identical inputs produce identical
bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .geometry import DepthMap, PointCloud

DEPTH_MAGIC = b"DMAP"
DEPTH_SENTINEL = -1.0

RESULT_COLUMNS = ("t", "pl_lat", "pl_lon", "pl_vert", "err_x", "err_y", "err_z")


def write_cloud_xyz(cloud: PointCloud, path: Path | str) -> None:
    """One ``x y z`` line per point, full double precision."""
    with open(path, "w") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


def read_cloud_xyz(path: Path | str) -> PointCloud:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'x y z', got {line!r}")
        rows.append([float(v) for v in parts])
    if not rows:
        return PointCloud(np.empty((0, 3)))
    return PointCloud(np.asarray(rows, dtype=float))


def write_cloud_bin(cloud: PointCloud, path: Path | str) -> None:
    """u64 point count followed by count*3 f64 coordinates."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(cloud)))
        fh.write(np.ascontiguousarray(cloud.points, dtype="<f8").tobytes())


def read_cloud_bin(path: Path | str) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated point-cloud file")
    (count,) = struct.unpack_from("<Q", raw)
    expect = 8 + count * 24
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} bytes for {count} points, got {len(raw)}")
    pts = np.frombuffer(raw, dtype="<f8", offset=8).reshape(count, 3)
    return PointCloud(pts.astype(float))


def write_depth_csv(depth_map: DepthMap, path: Path | str) -> None:
    """CSV grid, one raster row per line; empty pixels are written as ``nan``."""
    np.savetxt(path, depth_map.depth, delimiter=",", fmt="%.17g")


def read_depth_csv(path: Path | str) -> DepthMap:
    return DepthMap(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def write_depth_bin(depth_map: DepthMap, path: Path | str) -> None:
    """16-byte header (magic, u32 width, u32 height, f32 empty sentinel)
    followed by a row-major f32 raster with NaN replaced by the sentinel."""
    data = np.ascontiguousarray(depth_map.depth, dtype="<f4").copy()
    data[~np.isfinite(data)] = DEPTH_SENTINEL
    with open(path, "wb") as fh:
        fh.write(DEPTH_MAGIC)
        fh.write(struct.pack("<IIf", depth_map.width, depth_map.height, DEPTH_SENTINEL))
        fh.write(data.tobytes())


def read_depth_bin(path: Path | str) -> DepthMap:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != DEPTH_MAGIC:
        raise ValueError(f"{path}: not a depth-map raster (bad magic)")
    width, height, sentinel = struct.unpack_from("<IIf", raw, 4)
    expect = 16 + width * height * 4
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} bytes for {width}x{height}, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(height, width).astype(float)
    data[data == sentinel] = np.nan
    return DepthMap(data)


def write_json(obj, path: Path | str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: Path | str):
    with open(path) as fh:
        return json.load(fh)


def write_jsonl(rows, path: Path | str) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


def read_jsonl(path: Path | str) -> list:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_quaternion_lines(quats: np.ndarray, path: Path | str) -> None:
    """JSON-lines file of scalar-first quaternions, one array per line."""
    write_jsonl([[float(c) for c in q] for q in np.asarray(quats, dtype=float)], path)


def read_quaternion_lines(path: Path | str) -> np.ndarray:
    rows = read_jsonl(path)
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.empty((0, 4))
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"{path}: each line must hold one 4-element quaternion")
    return arr


def write_results_csv(rows, path: Path | str) -> None:
    """Per-timestep table: t, pl_lat, pl_lon, pl_vert, err_x, err_y, err_z."""
    with open(path, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            if len(row) != len(RESULT_COLUMNS):
                raise ValueError(f"result row must have {len(RESULT_COLUMNS)} fields")
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_results_csv(path: Path | str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header!r}")
        body = fh.read().strip()
    if not body:
        return np.empty((0, len(RESULT_COLUMNS)))
    rows = [[float(v) for v in line.split(",")] for line in body.splitlines()]
    return np.asarray(rows, dtype=float)
