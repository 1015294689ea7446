"""Voxelized environment, scene objects, bins and scenario loading.

The voxel grid is the shared spatial substrate every other module reads:
occupancy for collision checks, voxel indexing for affordance membership,
and the scenario file as the single source of world truth.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import OutOfBounds, SchemaError, ValidationError
from .geometry import SE2


class Category(str, enum.Enum):
    FOOD = "food"
    KITCHEN = "kitchen"
    HOUSEHOLD_TOOL = "household_tool"


class ObjectState(str, enum.Enum):
    FREE = "free"
    HELD = "held"
    BINNED = "binned"


@dataclass
class VoxelGrid:
    """Dense occupancy grid over a box [origin, origin + dims*resolution)."""

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]
    occupied: np.ndarray  # bool, shape dims

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        if self.resolution <= 0:
            raise ValidationError("grid resolution must be > 0")
        if any(d < 1 for d in self.dims):
            raise ValidationError("grid dims must all be >= 1")
        if self.occupied.shape != tuple(self.dims):
            raise ValidationError("occupancy array shape does not match dims")

    @staticmethod
    def empty(origin, resolution: float, dims) -> "VoxelGrid":
        dims = tuple(int(d) for d in dims)
        return VoxelGrid(np.asarray(origin, dtype=float), float(resolution),
                         dims, np.zeros(dims, dtype=bool))

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.array(self.dims) * self.resolution

    def in_bounds(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.origin) and np.all(p < self.upper))

    def world_to_voxel(self, p) -> tuple[int, int, int]:
        """Voxel index of point p: floor((p - origin) / resolution) per axis."""
        p = np.asarray(p, dtype=float)
        if not self.in_bounds(p):
            raise OutOfBounds(f"point {p.tolist()} outside grid bounds")
        i = np.floor((p - self.origin) / self.resolution).astype(int)
        # guard against float round-up at the very top edge
        i = np.minimum(i, np.array(self.dims) - 1)
        return (int(i[0]), int(i[1]), int(i[2]))

    def voxel_to_center(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.dims)):
            raise OutOfBounds(f"voxel index {idx.tolist()} outside grid")
        return self.origin + (idx + 0.5) * self.resolution

    def voxel_in_bounds(self, idx) -> bool:
        idx = np.asarray(idx, dtype=int)
        return bool(np.all(idx >= 0) and np.all(idx < np.array(self.dims)))

    def linear_index(self, idx) -> int:
        nx, ny, nz = self.dims
        return (idx[0] * ny + idx[1]) * nz + idx[2]

    def is_occupied_voxel(self, idx) -> bool:
        return bool(self.occupied[idx[0], idx[1], idx[2]])

    def is_free(self, p) -> bool:
        return not self.is_occupied_voxel(self.world_to_voxel(p))

    def set_occupied(self, idx, value: bool = True) -> None:
        self.occupied[idx[0], idx[1], idx[2]] = value

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def occupied_columns(self, z_band: tuple[float, float]) -> np.ndarray:
        """2-D mask (nx, ny): any occupied voxel whose z-slab intersects the band."""
        z0, z1 = z_band
        oz = self.origin[2]
        lo = max(0, int(math.floor((z0 - oz) / self.resolution)))
        hi = min(self.dims[2], int(math.ceil((z1 - oz) / self.resolution)))
        if hi <= lo:
            return np.zeros(self.dims[:2], dtype=bool)
        return self.occupied[:, :, lo:hi].any(axis=2)

    def all_voxel_centers(self) -> np.ndarray:
        """Centers of every voxel, shape (nx*ny*nz, 3) in linear-index order."""
        nx, ny, nz = self.dims
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
        return self.origin + (idx + 0.5) * self.resolution


def traverse_voxels(grid: VoxelGrid, a, b) -> list[tuple[int, int, int]]:
    """All voxels intersected by segment ab, via 3-D DDA (Amanatides-Woo).

    Reference implementation: the vectorized occlusion check used by the
    capability-map precompute must agree with this exactly.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cur = list(grid.world_to_voxel(a))
    end = list(grid.world_to_voxel(b))
    d = b - a

    step = [0, 0, 0]
    tmax = [math.inf, math.inf, math.inf]
    tdelta = [math.inf, math.inf, math.inf]
    for ax in range(3):
        if d[ax] > 0:
            step[ax] = 1
            bound = grid.origin[ax] + (cur[ax] + 1) * grid.resolution
            tmax[ax] = (bound - a[ax]) / d[ax]
            tdelta[ax] = grid.resolution / d[ax]
        elif d[ax] < 0:
            step[ax] = -1
            bound = grid.origin[ax] + cur[ax] * grid.resolution
            tmax[ax] = (bound - a[ax]) / d[ax]
            tdelta[ax] = grid.resolution / -d[ax]

    out = [tuple(cur)]
    max_steps = sum(abs(end[ax] - cur[ax]) for ax in range(3)) + 3
    steps = 0
    while cur != end and steps < max_steps:
        if tmax[0] <= tmax[1] and tmax[0] <= tmax[2]:
            ax = 0
        elif tmax[1] <= tmax[2]:
            ax = 1
        else:
            ax = 2
        cur[ax] += step[ax]
        tmax[ax] += tdelta[ax]
        steps += 1
        if not grid.voxel_in_bounds(cur):
            break
        out.append(tuple(cur))
    if tuple(end) not in out:
        out.append(tuple(end))
    return out


def is_segment_free(grid: VoxelGrid, a, b) -> bool:
    """True iff every voxel intersected by segment ab is Free."""
    for idx in traverse_voxels(grid, a, b):
        if grid.occupied[idx]:
            return False
    return True


# Batch occlusion check for precompute. Mirrors traverse_voxels arithmetic
# exactly; tests assert equality against the scalar path on random segments.
_BATCH_DDA = None


def _batch_dda_fn():
    global _BATCH_DDA
    if _BATCH_DDA is None:
        from numba import njit

        @njit(cache=True, nogil=True)
        def _segments_free(occ, ox, oy, oz, res, nx, ny, nz, pa, pb, out):
            n = pa.shape[0]
            for k in range(n):
                ax0, ay0, az0 = pa[k, 0], pa[k, 1], pa[k, 2]
                bx0, by0, bz0 = pb[k, 0], pb[k, 1], pb[k, 2]
                cx = int(math.floor((ax0 - ox) / res))
                cy = int(math.floor((ay0 - oy) / res))
                cz = int(math.floor((az0 - oz) / res))
                ex = int(math.floor((bx0 - ox) / res))
                ey = int(math.floor((by0 - oy) / res))
                ez = int(math.floor((bz0 - oz) / res))
                if cx >= nx:
                    cx = nx - 1
                if cy >= ny:
                    cy = ny - 1
                if cz >= nz:
                    cz = nz - 1
                if ex >= nx:
                    ex = nx - 1
                if ey >= ny:
                    ey = ny - 1
                if ez >= nz:
                    ez = nz - 1
                dx = bx0 - ax0
                dy = by0 - ay0
                dz = bz0 - az0
                stx = 0
                sty = 0
                stz = 0
                tmx = math.inf
                tmy = math.inf
                tmz = math.inf
                tdx = math.inf
                tdy = math.inf
                tdz = math.inf
                if dx > 0:
                    stx = 1
                    tmx = (ox + (cx + 1) * res - ax0) / dx
                    tdx = res / dx
                elif dx < 0:
                    stx = -1
                    tmx = (ox + cx * res - ax0) / dx
                    tdx = res / -dx
                if dy > 0:
                    sty = 1
                    tmy = (oy + (cy + 1) * res - ay0) / dy
                    tdy = res / dy
                elif dy < 0:
                    sty = -1
                    tmy = (oy + cy * res - ay0) / dy
                    tdy = res / -dy
                if dz > 0:
                    stz = 1
                    tmz = (oz + (cz + 1) * res - az0) / dz
                    tdz = res / dz
                elif dz < 0:
                    stz = -1
                    tmz = (oz + cz * res - az0) / dz
                    tdz = res / -dz

                free = not occ[cx, cy, cz]
                max_steps = abs(ex - cx) + abs(ey - cy) + abs(ez - cz) + 3
                steps = 0
                while free and steps < max_steps and not (
                        cx == ex and cy == ey and cz == ez):
                    if tmx <= tmy and tmx <= tmz:
                        cx += stx
                        tmx += tdx
                    elif tmy <= tmz:
                        cy += sty
                        tmy += tdy
                    else:
                        cz += stz
                        tmz += tdz
                    steps += 1
                    if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
                        break
                    if occ[cx, cy, cz]:
                        free = False
                if free and occ[ex, ey, ez]:
                    free = False
                out[k] = free

        _BATCH_DDA = _segments_free
    return _BATCH_DDA


def segments_free_batch(grid: VoxelGrid, starts: np.ndarray,
                        ends: np.ndarray) -> np.ndarray:
    """Vectorized is_segment_free over N segments (both endpoints in bounds)."""
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    ends = np.ascontiguousarray(ends, dtype=np.float64)
    out = np.zeros(len(starts), dtype=np.bool_)
    if len(starts) == 0:
        return out
    if not grid.occupied.any():
        out[:] = True
        return out
    fn = _batch_dda_fn()
    nx, ny, nz = grid.dims
    fn(grid.occupied, float(grid.origin[0]), float(grid.origin[1]),
       float(grid.origin[2]), float(grid.resolution), nx, ny, nz,
       starts, ends, out)
    return out


@dataclass
class SceneObject:
    """Point object to be deposited in its category bin.

    State machine: Free -> Held -> Free, Free -> Held -> Binned.
    Binned is terminal.
    """

    id: int
    category: Category
    position: np.ndarray
    state: ObjectState = ObjectState.FREE
    held_by: str | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)

    def pick_up(self, agent: str) -> None:
        if self.state is not ObjectState.FREE:
            raise ValidationError(
                f"object {self.id} cannot be picked while {self.state.value}")
        self.state = ObjectState.HELD
        self.held_by = agent

    def put_down(self, position) -> None:
        if self.state is not ObjectState.HELD:
            raise ValidationError(f"object {self.id} is not held")
        self.position = np.asarray(position, dtype=float)
        self.state = ObjectState.FREE
        self.held_by = None

    def deposit(self, position) -> None:
        if self.state is not ObjectState.HELD:
            raise ValidationError(f"object {self.id} is not held")
        self.position = np.asarray(position, dtype=float)
        self.state = ObjectState.BINNED
        self.held_by = None


@dataclass
class Bin:
    """Deposit disk: an object placed within radius of position is deposited."""

    id: int
    accepts: Category
    position: np.ndarray
    radius: float = 0.25

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)

    def covers(self, p) -> bool:
        return bool(np.linalg.norm(np.asarray(p, dtype=float) - self.position)
                    <= self.radius)


@dataclass
class HumanConfig:
    chest_pos: np.ndarray
    heading: float = 0.0
    speed: float = 1.0
    reach_semi_axes: np.ndarray = field(
        default_factory=lambda: np.array([0.8, 0.8, 0.6]))


@dataclass
class ArmConfig:
    link_lengths: list[float]
    link_axes: list[str]           # "z" (yaw) or "y" (pitch) per link
    joint_limits: list[tuple[float, float]]
    mount_xyz: np.ndarray
    mount_yaw: float = 0.0


@dataclass
class RobotConfig:
    base_pose: SE2
    arm: ArmConfig
    speed: float = 0.5
    footprint_radius: float = 0.3
    height_band: tuple[float, float] = (0.0, 1.2)


@dataclass
class SensorConfig:
    offset: np.ndarray
    fov: tuple[float, float] = (1.2, 0.8)
    max_range: float = 8.0
    depth_noise_sigma: float = 0.02
    median_window: int = 5
    self_tracks: bool = False


@dataclass
class SensorsConfig:
    headset: SensorConfig
    robot: SensorConfig
    association_radius: float = 0.3


@dataclass
class Scenario:
    grid: VoxelGrid
    objects: list[SceneObject]
    bins: list[Bin]
    human: HumanConfig
    robot: RobotConfig
    sensors: SensorsConfig
    raw: dict


_DEFAULT_ARM = {
    "links": [{"length": 0.35, "axis": "z"},
              {"length": 0.30, "axis": "y"},
              {"length": 0.20, "axis": "y"}],
    "limits": [[-3.141592653589793, 3.141592653589793],
               [-1.57, 1.57], [-1.57, 1.57]],
    "mount": {"xyz": [0.0, 0.0, 0.55], "yaw": 0.0},
}


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise SchemaError(f"{ctx}: missing required field '{key}'")
    return d[key]


def _reject_unknown(d: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise SchemaError(f"{ctx}: unknown field(s) {sorted(unknown)}")


def _vec3(v, ctx: str) -> np.ndarray:
    if (not isinstance(v, (list, tuple)) or len(v) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                       for x in v)):
        raise SchemaError(f"{ctx}: expected a 3-number array, got {v!r}")
    return np.asarray(v, dtype=float)


def _category(v, ctx: str) -> Category:
    try:
        return Category(v)
    except ValueError:
        raise SchemaError(
            f"{ctx}: unknown category {v!r} "
            f"(expected one of {[c.value for c in Category]})") from None


def _parse_sensor(d: dict, ctx: str, self_tracks_default: bool) -> SensorConfig:
    _reject_unknown(d, {"offset", "fov", "max_range", "depth_noise_sigma",
                        "median_window", "self_tracks"}, ctx)
    cfg = SensorConfig(
        offset=_vec3(d.get("offset", [0.0, 0.0, 0.0]), f"{ctx}.offset"),
        fov=tuple(d.get("fov", (1.2, 0.8))),
        max_range=float(d.get("max_range", 8.0)),
        depth_noise_sigma=float(d.get("depth_noise_sigma", 0.02)),
        median_window=int(d.get("median_window", 5)),
        self_tracks=bool(d.get("self_tracks", self_tracks_default)),
    )
    if cfg.median_window < 1 or cfg.median_window % 2 == 0:
        raise ValidationError(f"{ctx}: median_window must be odd and >= 1")
    if not (0 < cfg.fov[0] <= math.pi / 2) or not (0 < cfg.fov[1] <= math.pi / 2):
        raise ValidationError(f"{ctx}: fov half-angles must lie in (0, pi/2]")
    return cfg


def _parse_arm(d: dict) -> ArmConfig:
    _reject_unknown(d, {"links", "limits", "mount"}, "agents.robot.arm")
    links = _require(d, "links", "agents.robot.arm")
    limits = _require(d, "limits", "agents.robot.arm")
    if len(links) != len(limits):
        raise SchemaError("agents.robot.arm: links and limits length mismatch")
    lengths, axes = [], []
    for i, ln in enumerate(links):
        _reject_unknown(ln, {"length", "axis"}, f"arm.links[{i}]")
        length = float(_require(ln, "length", f"arm.links[{i}]"))
        axis = _require(ln, "axis", f"arm.links[{i}]")
        if axis not in ("z", "y"):
            raise SchemaError(f"arm.links[{i}]: axis must be 'z' or 'y'")
        if length <= 0:
            raise ValidationError(f"arm.links[{i}]: length must be > 0")
        lengths.append(length)
        axes.append(axis)
    lim = []
    for i, pair in enumerate(limits):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise SchemaError(f"arm.limits[{i}]: expected [min, max]")
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise ValidationError(f"arm.limits[{i}]: min must be < max")
        lim.append((lo, hi))
    mount = d.get("mount", {"xyz": [0.0, 0.0, 0.0], "yaw": 0.0})
    _reject_unknown(mount, {"xyz", "yaw"}, "arm.mount")
    return ArmConfig(lengths, axes, lim,
                     _vec3(mount.get("xyz", [0, 0, 0]), "arm.mount.xyz"),
                     float(mount.get("yaw", 0.0)))


def parse_scenario(doc: dict) -> Scenario:
    """Validate a parsed scenario document and build the world."""
    if not isinstance(doc, dict):
        raise SchemaError("scenario root must be an object")
    _reject_unknown(doc, {"grid", "objects", "bins", "agents", "sensors"},
                    "scenario")

    gd = _require(doc, "grid", "scenario")
    _reject_unknown(gd, {"origin", "resolution", "dims", "occupied"}, "grid")
    origin = _vec3(_require(gd, "origin", "grid"), "grid.origin")
    resolution = _require(gd, "resolution", "grid")
    if not isinstance(resolution, (int, float)) or resolution <= 0:
        raise ValidationError("grid.resolution must be a positive number")
    dims_raw = _require(gd, "dims", "grid")
    if (not isinstance(dims_raw, (list, tuple)) or len(dims_raw) != 3
            or not all(isinstance(x, int) and not isinstance(x, bool)
                       for x in dims_raw)):
        raise SchemaError("grid.dims: expected three integers")
    if any(x < 1 for x in dims_raw):
        raise ValidationError("grid.dims must all be >= 1")
    grid = VoxelGrid.empty(origin, float(resolution), dims_raw)
    for k, trip in enumerate(gd.get("occupied", [])):
        if not isinstance(trip, (list, tuple)) or len(trip) != 3:
            raise SchemaError(f"grid.occupied[{k}]: expected a voxel triple")
        idx = tuple(int(x) for x in trip)
        if not grid.voxel_in_bounds(idx):
            raise ValidationError(f"grid.occupied[{k}]: voxel {idx} out of grid")
        grid.set_occupied(idx)

    objects: list[SceneObject] = []
    seen_ids: set[int] = set()
    for k, od in enumerate(_require(doc, "objects", "scenario")):
        _reject_unknown(od, {"id", "category", "pos"}, f"objects[{k}]")
        oid = _require(od, "id", f"objects[{k}]")
        if not isinstance(oid, int) or isinstance(oid, bool):
            raise SchemaError(f"objects[{k}]: id must be an integer")
        if oid in seen_ids:
            raise ValidationError(f"objects[{k}]: duplicate object id {oid}")
        seen_ids.add(oid)
        pos = _vec3(_require(od, "pos", f"objects[{k}]"), f"objects[{k}].pos")
        if not grid.in_bounds(pos):
            raise ValidationError(f"objects[{k}]: position outside grid bounds")
        if not grid.is_free(pos):
            raise ValidationError(f"objects[{k}]: position inside occupied voxel")
        objects.append(SceneObject(
            oid, _category(_require(od, "category", f"objects[{k}]"),
                           f"objects[{k}].category"), pos))

    bins: list[Bin] = []
    bin_ids: set[int] = set()
    by_cat: dict[Category, int] = {}
    for k, bd in enumerate(_require(doc, "bins", "scenario")):
        _reject_unknown(bd, {"id", "accepts", "pos", "radius"}, f"bins[{k}]")
        bid = _require(bd, "id", f"bins[{k}]")
        if not isinstance(bid, int) or isinstance(bid, bool):
            raise SchemaError(f"bins[{k}]: id must be an integer")
        if bid in bin_ids:
            raise ValidationError(f"bins[{k}]: duplicate bin id {bid}")
        bin_ids.add(bid)
        cat = _category(_require(bd, "accepts", f"bins[{k}]"),
                        f"bins[{k}].accepts")
        if cat in by_cat:
            raise ValidationError(
                f"bins[{k}]: category {cat.value!r} already has a bin")
        by_cat[cat] = bid
        pos = _vec3(_require(bd, "pos", f"bins[{k}]"), f"bins[{k}].pos")
        if not grid.in_bounds(pos):
            raise ValidationError(f"bins[{k}]: position outside grid bounds")
        radius = float(bd.get("radius", 0.25))
        if radius <= 0:
            raise ValidationError(f"bins[{k}]: radius must be > 0")
        bins.append(Bin(bid, cat, pos, radius))
    missing = [c.value for c in Category if c not in by_cat]
    if missing:
        raise ValidationError(f"missing bin category(ies): {missing}")

    ag = _require(doc, "agents", "scenario")
    _reject_unknown(ag, {"human", "robot"}, "agents")
    hd = _require(ag, "human", "agents")
    _reject_unknown(hd, {"chest_pos", "heading", "speed", "reach"},
                    "agents.human")
    chest = _vec3(_require(hd, "chest_pos", "agents.human"),
                  "agents.human.chest_pos")
    if not grid.in_bounds(chest):
        raise ValidationError("agents.human.chest_pos outside grid bounds")
    reach = _vec3(hd.get("reach", [0.8, 0.8, 0.6]), "agents.human.reach")
    if np.any(reach <= 0):
        raise ValidationError("agents.human.reach semi-axes must be > 0")
    human = HumanConfig(chest, float(hd.get("heading", 0.0)),
                        float(hd.get("speed", 1.0)), reach)

    rd = _require(ag, "robot", "agents")
    _reject_unknown(rd, {"base_pose", "arm", "speed", "footprint_radius",
                         "height_band"}, "agents.robot")
    bp = _require(rd, "base_pose", "agents.robot")
    if not isinstance(bp, (list, tuple)) or len(bp) != 3:
        raise SchemaError("agents.robot.base_pose: expected [x, y, theta]")
    base_pose = SE2(float(bp[0]), float(bp[1]), float(bp[2]))
    if not grid.in_bounds([base_pose.x, base_pose.y,
                           grid.origin[2] + grid.resolution / 2]):
        raise ValidationError("agents.robot.base_pose outside grid bounds")
    arm = _parse_arm(rd.get("arm", _DEFAULT_ARM))
    band = tuple(float(x) for x in rd.get("height_band", (0.0, 1.2)))
    robot = RobotConfig(base_pose, arm, float(rd.get("speed", 0.5)),
                        float(rd.get("footprint_radius", 0.3)), band)

    sd = doc.get("sensors", {})
    _reject_unknown(sd, {"headset", "robot", "association_radius"}, "sensors")
    sensors = SensorsConfig(
        headset=_parse_sensor(sd.get("headset", {}), "sensors.headset",
                              self_tracks_default=True),
        robot=_parse_sensor(sd.get("robot", {}), "sensors.robot",
                            self_tracks_default=False),
        association_radius=float(sd.get("association_radius", 0.3)),
    )

    return Scenario(grid, objects, bins, human, robot, sensors, doc)


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"scenario is not valid JSON: {e}") from None
    return parse_scenario(doc)


def try_deposit(obj: SceneObject, position, bins: list[Bin]) -> Bin | None:
    """Deposit the held object at position if a matching bin covers it.

    Returns the bin on deposit; otherwise the object is put down Free.
    """
    for b in bins:
        if b.accepts is obj.category and b.covers(position):
            obj.deposit(position)
            return b
    obj.put_down(position)
    return None
