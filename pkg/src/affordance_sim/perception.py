"""Simulated dual-perspective sensing and object fusion.

Both sensors yield the true bearing to each visible object with a
median-filtered noisy depth, standing in for bounding-box-center plus depth
localization. Co-localization error between sensor frames is a configurable
rigid perturbation (identity by default). Object positions flow only through
detections; an object seen by neither sensor never enters the fused set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Transform, rot_z
from .world import (Scenario, SceneObject, ObjectState, SensorConfig,
                    VoxelGrid, is_segment_free)


@dataclass
class FrameCalibration:
    """Per-sensor frame error applied to estimates (identity = perfect)."""

    headset_error: Transform = field(default_factory=Transform.identity)
    robot_error: Transform = field(default_factory=Transform.identity)

    def error_for(self, sensor_id: str) -> Transform:
        return self.headset_error if sensor_id == "headset" else self.robot_error


@dataclass(frozen=True)
class Detection:
    object_id: int
    position: np.ndarray     # estimated, world frame
    source: str              # "headset" | "robot"
    time: float
    sigma: float


@dataclass
class DetectedObjectSet:
    """Fused object estimates: one entry per object id (the shared O)."""

    entries: dict[int, tuple[np.ndarray, float]] = field(default_factory=dict)

    def ids(self) -> list[int]:
        return sorted(self.entries)

    def __contains__(self, object_id: int) -> bool:
        return object_id in self.entries

    def position(self, object_id: int) -> np.ndarray:
        return self.entries[object_id][0]

    def update_from(self, other: "DetectedObjectSet") -> None:
        """Last-seen persistence: newer estimates overwrite, others remain."""
        for oid, entry in other.entries.items():
            self.entries[oid] = entry


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def visible(sensor: SensorConfig, origin: np.ndarray, heading: float,
            point: np.ndarray, grid: VoxelGrid) -> bool:
    """FOV + range + occlusion visibility of a world point."""
    vec = np.asarray(point, float) - origin
    rng_to = float(np.linalg.norm(vec))
    if rng_to <= 1e-9 or rng_to > sensor.max_range:
        return False
    az = _wrap_angle(math.atan2(vec[1], vec[0]) - heading)
    el = math.atan2(vec[2], math.hypot(vec[0], vec[1]))
    if abs(az) > sensor.fov[0] or abs(el) > sensor.fov[1]:
        return False
    if not grid.in_bounds(origin) or not grid.in_bounds(point):
        return False
    return is_segment_free(grid, origin, point)


def sensor_origin(sensor: SensorConfig, mount_pos: np.ndarray,
                  heading: float) -> np.ndarray:
    return np.asarray(mount_pos, float) + rot_z(heading) @ sensor.offset


def sense(sensor_id: str, sensor: SensorConfig, mount_pos, heading: float,
          objects: list[SceneObject], grid: VoxelGrid,
          calibration: FrameCalibration, rng: np.random.Generator,
          time: float) -> list[Detection]:
    """Detections of Free objects visible to one sensor this tick.

    Depth is the median of `median_window` Gaussian draws around the true
    range; bearing is exact. Estimates pass through the sensor's calibration
    error before entering the world frame.
    """
    origin = sensor_origin(sensor, mount_pos, heading)
    err = calibration.error_for(sensor_id)
    out = []
    for obj in sorted(objects, key=lambda o: o.id):
        if obj.state is not ObjectState.FREE:
            continue
        if not visible(sensor, origin, heading, obj.position, grid):
            continue
        vec = obj.position - origin
        true_range = float(np.linalg.norm(vec))
        if sensor.depth_noise_sigma > 0:
            draws = rng.normal(true_range, sensor.depth_noise_sigma,
                               sensor.median_window)
            depth = float(np.median(draws))
        else:
            depth = true_range
        est = origin + vec / true_range * depth
        out.append(Detection(obj.id, err.apply(est), sensor_id, time,
                             sensor.depth_noise_sigma))
    return out


def fuse(detections: list[Detection], association_radius: float) -> DetectedObjectSet:
    """Merge per-object detections into the shared O.

    Within an object id, detections farther than association_radius from the
    lowest-sigma detection are dropped; survivors are averaged with 1/sigma^2
    weights (zero-sigma sources average equally and dominate).
    """
    by_id: dict[int, list[Detection]] = {}
    for det in detections:
        by_id.setdefault(det.object_id, []).append(det)
    fused = DetectedObjectSet()
    for oid in sorted(by_id):
        group = by_id[oid]
        ref = min(group, key=lambda d: d.sigma)  # stable: first lowest sigma
        group = [d for d in group
                 if np.linalg.norm(d.position - ref.position) <= association_radius]
        zero = [d for d in group if d.sigma == 0.0]
        if zero:
            pos = np.mean([d.position for d in zero], axis=0)
        else:
            weights = np.array([1.0 / d.sigma ** 2 for d in group])
            pts = np.stack([d.position for d in group])
            pos = (pts * weights[:, None]).sum(axis=0) / weights.sum()
        fused.entries[oid] = (pos, max(d.time for d in group))
    return fused


def human_observed(scenario: Scenario, chest: np.ndarray, heading: float,
                   robot_sensor_origin: np.ndarray,
                   robot_heading: float) -> bool:
    """Gate for A_H updates: headset self-tracking or robot sees the chest."""
    if scenario.sensors.headset.self_tracks:
        return True
    return visible(scenario.sensors.robot, robot_sensor_origin, robot_heading,
                   chest, scenario.grid)
