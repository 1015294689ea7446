"""Agent affordance models.

The robot side is a capability map: per voxel, the best manipulability the
arm achieves over a lattice of candidate base poses and a seeded Halton sweep
of joint space, with line-of-reach occlusion against the occupancy grid. The
human side is a monotone voxel set grown from chest-centered reach ellipsoids
and recorded interactions, starting from nothing affordable.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import EmptyLattice, OutOfBounds
from .geometry import SE2, Transform, rot_z
from .kinematics import KinematicChain, fk_batch, manipulability_w_batch
from .world import VoxelGrid, segments_free_batch

DEFAULT_W_THRESHOLD = 1e-3
DEFAULT_SAMPLES_PER_POSE = 4096
NO_HINT = 0xFFFFFFFF


@dataclass(frozen=True)
class ReachEllipsoid:
    """Reach volume around the human chest, forward axis along the heading."""

    center: np.ndarray
    semi_axes: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, float))
        object.__setattr__(self, "semi_axes", np.asarray(self.semi_axes, float))
        if np.any(self.semi_axes <= 0):
            raise ValueError("ellipsoid semi-axes must be > 0")

    @staticmethod
    def for_human(chest, heading: float, semi_axes) -> "ReachEllipsoid":
        return ReachEllipsoid(chest, semi_axes, rot_z(heading))

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Boundary-inclusive membership mask for an (N, 3) array of points."""
        local = (np.atleast_2d(pts) - self.center) @ self.orientation
        return np.sum((local / self.semi_axes) ** 2, axis=1) <= 1.0

    def contains(self, p) -> bool:
        return bool(self.contains_points(np.asarray(p, float)[None, :])[0])


class HumanAffordanceGrid:
    """Monotone voxel set A_H over the world grid; starts empty."""

    def __init__(self, grid: VoxelGrid):
        self.grid = grid
        self.voxels = np.zeros(grid.n_voxels, dtype=bool)
        self.chest_history: list[tuple[float, np.ndarray]] = []

    @property
    def count(self) -> int:
        return int(self.voxels.sum())

    def contains(self, p) -> bool:
        idx = self.grid.world_to_voxel(p)
        return bool(self.voxels[self.grid.linear_index(idx)])

    def contains_voxel(self, lin: int) -> bool:
        return bool(self.voxels[lin])

    def add_linear(self, lins: np.ndarray) -> np.ndarray:
        """Union in linear voxel ids; returns only the newly added ones."""
        lins = np.asarray(lins, dtype=np.int64)
        new = lins[~self.voxels[lins]]
        self.voxels[new] = True
        return new


def _grid_box_voxels(grid: VoxelGrid, lo: np.ndarray, hi: np.ndarray):
    """Voxel indices and centers for the axis box [lo, hi], clipped to grid."""
    i_lo = np.maximum(np.floor((lo - grid.origin) / grid.resolution), 0).astype(int)
    i_hi = np.minimum(np.ceil((hi - grid.origin) / grid.resolution).astype(int),
                      np.array(grid.dims))
    if np.any(i_hi <= i_lo):
        return np.empty((0, 3), int), np.empty((0, 3))
    ix, iy, iz = np.meshgrid(np.arange(i_lo[0], i_hi[0]),
                             np.arange(i_lo[1], i_hi[1]),
                             np.arange(i_lo[2], i_hi[2]), indexing="ij")
    idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
    centers = grid.origin + (idx + 0.5) * grid.resolution
    return idx, centers


def _linear(grid: VoxelGrid, idx: np.ndarray) -> np.ndarray:
    nx, ny, nz = grid.dims
    return (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]


def update_human_affordance(ah: HumanAffordanceGrid, ellipsoid: ReachEllipsoid,
                            grid: VoxelGrid, time: float = 0.0) -> np.ndarray:
    """Grow A_H with Free voxel centers inside the reach ellipsoid.

    Out-of-bounds portions are clipped. Returns newly added linear ids.
    """
    r = float(np.max(ellipsoid.semi_axes))
    idx, centers = _grid_box_voxels(grid, ellipsoid.center - r,
                                    ellipsoid.center + r)
    if len(idx) == 0:
        return np.empty(0, np.int64)
    inside = ellipsoid.contains_points(centers)
    free = ~grid.occupied[idx[:, 0], idx[:, 1], idx[:, 2]]
    ah.chest_history.append((time, ellipsoid.center.copy()))
    return ah.add_linear(_linear(grid, idx[inside & free]))


def record_interaction(ah: HumanAffordanceGrid, p, radius: float,
                       grid: VoxelGrid) -> np.ndarray:
    """Grow A_H with Free voxels within radius of an interaction point."""
    p = np.asarray(p, float)
    containing = grid.world_to_voxel(p)
    idx, centers = _grid_box_voxels(grid, p - radius, p + radius)
    within = np.linalg.norm(centers - p, axis=1) <= radius
    within |= np.all(idx == np.array(containing), axis=1)
    free = ~grid.occupied[idx[:, 0], idx[:, 1], idx[:, 2]]
    return ah.add_linear(_linear(grid, idx[within & free]))


@dataclass
class VoxelCapability:
    reachable: bool
    best_w: float
    base_pose_hint: SE2 | None


@dataclass
class CapabilityMap:
    """Precomputed robot affordance map A_R.

    Per-voxel records are reduced over (base pose, joint sample) pairs; the
    sampling spec is retained so pose-level reachability questions can be
    re-derived exactly (used by the planner's terminal-pose search).
    """

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]
    lattice: list[SE2]
    chain: KinematicChain
    seed: int
    samples_per_pose: int
    w_threshold: float
    best_w: np.ndarray              # float64[n_voxels]
    best_pose: np.ndarray           # int32[n_voxels], -1 = none
    best_sample: np.ndarray = field(default=None)  # int32, -1 after load
    _samples: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def reachable(self) -> np.ndarray:
        return self.best_w > self.w_threshold

    def geometry_matches(self, grid: VoxelGrid) -> bool:
        return (np.allclose(self.origin, grid.origin)
                and self.resolution == grid.resolution
                and tuple(self.dims) == tuple(grid.dims))

    def _voxel_lin(self, p) -> int:
        p = np.asarray(p, float)
        upper = self.origin + np.array(self.dims) * self.resolution
        if np.any(p < self.origin) or np.any(p >= upper):
            raise OutOfBounds(f"point {p.tolist()} outside capability map")
        idx = np.minimum(np.floor((p - self.origin) / self.resolution).astype(int),
                         np.array(self.dims) - 1)
        nx, ny, nz = self.dims
        return int((idx[0] * ny + idx[1]) * nz + idx[2])

    def query(self, p) -> VoxelCapability:
        lin = self._voxel_lin(p)
        w = float(self.best_w[lin])
        pose = int(self.best_pose[lin])
        hint = self.lattice[pose] if pose >= 0 else None
        return VoxelCapability(bool(w > self.w_threshold), w, hint)

    def contains(self, p) -> bool:
        return bool(self.best_w[self._voxel_lin(p)] > self.w_threshold)

    def samples(self):
        """(joint configs, base-frame ee points, w scores); generated once."""
        if self._samples is None:
            self._samples = _joint_samples(self.chain, self.seed,
                                           self.samples_per_pose)
        return self._samples

    def reachable_linear_ids(self) -> np.ndarray:
        return np.flatnonzero(self.reachable)


def _joint_samples(chain: KinematicChain, seed: int, n: int):
    if n <= 0:
        nj = chain.n_joints
        return (np.empty((0, nj)), np.empty((0, 3)), np.empty(0))
    halton = qmc.Halton(d=chain.n_joints, scramble=True, seed=seed)
    u = halton.random(n)
    lo, hi = chain.joint_limits[:, 0], chain.joint_limits[:, 1]
    qs = lo + u * (hi - lo)
    return qs, fk_batch(chain, qs), manipulability_w_batch(chain, qs)


def _pose_world_points(pose: SE2, ee_base: np.ndarray) -> np.ndarray:
    rot = rot_z(pose.theta)
    return ee_base @ rot.T + np.array([pose.x, pose.y, 0.0])


def _pose_shoulder(pose: SE2, chain: KinematicChain) -> np.ndarray:
    return rot_z(pose.theta) @ chain.mount.translation + np.array(
        [pose.x, pose.y, 0.0])


def _pose_voxel_table(grid: VoxelGrid, chain: KinematicChain, pose: SE2,
                      ee_base: np.ndarray, w: np.ndarray):
    """Reduce one base pose's samples to per-voxel (linear id, max w, sample).

    A sample counts iff its end-effector point is in bounds and the straight
    shoulder-to-end-effector segment is collision-free.
    """
    pts = _pose_world_points(pose, ee_base)
    upper = grid.upper
    inb = np.all(pts >= grid.origin, axis=1) & np.all(pts < upper, axis=1)
    samp = np.flatnonzero(inb)
    if len(samp) == 0:
        return (np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64))
    pts = pts[samp]
    if grid.occupied.any():
        shoulder = _pose_shoulder(pose, chain)
        starts = np.broadcast_to(shoulder, pts.shape)
        free = segments_free_batch(grid, starts, pts)
        samp = samp[free]
        pts = pts[free]
        if len(samp) == 0:
            return (np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64))
    idx = np.minimum(np.floor((pts - grid.origin) / grid.resolution).astype(int),
                     np.array(grid.dims) - 1)
    lin = _linear(grid, idx)
    ws = w[samp]
    order = np.lexsort((samp, -ws, lin))
    lin_s, ws_s, samp_s = lin[order], ws[order], samp[order]
    first = np.ones(len(lin_s), dtype=bool)
    first[1:] = lin_s[1:] != lin_s[:-1]
    return lin_s[first], ws_s[first], samp_s[first]


def precompute_capability_map(chain: KinematicChain, grid: VoxelGrid,
                              base_lattice: list[SE2],
                              samples_per_pose: int = DEFAULT_SAMPLES_PER_POSE,
                              w_threshold: float = DEFAULT_W_THRESHOLD,
                              seed: int = 0,
                              threads: int = 1) -> CapabilityMap:
    """Sweep (base pose, joint sample) pairs into a per-voxel capability map.

    Deterministic for a given (chain, lattice, seed, samples): pose results
    are merged in lattice order (max w, ties to the lower lattice index), so
    the thread count never changes the output.
    """
    if not base_lattice:
        raise EmptyLattice("capability map needs at least one base pose")
    n_vox = grid.n_voxels
    best_w = np.zeros(n_vox)
    best_pose = np.full(n_vox, -1, dtype=np.int32)
    best_sample = np.full(n_vox, -1, dtype=np.int32)
    qs, ee_base, w = _joint_samples(chain, seed, samples_per_pose)

    if samples_per_pose > 0:
        def compute(k):
            return _pose_voxel_table(grid, chain, base_lattice[k], ee_base, w)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                tables = list(ex.map(compute, range(len(base_lattice))))
        else:
            tables = [compute(k) for k in range(len(base_lattice))]

        for k, (lin, ws, samp) in enumerate(tables):
            better = ws > best_w[lin]
            upd = lin[better]
            best_w[upd] = ws[better]
            best_pose[upd] = k
            best_sample[upd] = samp[better]

    cap = CapabilityMap(grid.origin.copy(), grid.resolution, tuple(grid.dims),
                        list(base_lattice), chain, seed, samples_per_pose,
                        w_threshold, best_w, best_pose, best_sample)
    cap._samples = (qs, ee_base, w)
    return cap


def query_robot_affordance(cap: CapabilityMap, p) -> VoxelCapability:
    return cap.query(p)


def pose_reaches(cap: CapabilityMap, grid: VoxelGrid, pose: SE2, p) -> float:
    """Best w at point p's voxel from one base pose; 0.0 if unreachable.

    Re-derives the precompute semantics for a single (pose, voxel) pair.
    """
    target_lin = cap._voxel_lin(p)
    _, ee_base, w = cap.samples()
    if len(w) == 0:
        return 0.0
    pts = _pose_world_points(pose, ee_base)
    upper = grid.upper
    inb = np.all(pts >= grid.origin, axis=1) & np.all(pts < upper, axis=1)
    idx = np.minimum(np.floor((pts[inb] - grid.origin)
                              / grid.resolution).astype(int),
                     np.array(grid.dims) - 1)
    samp = np.flatnonzero(inb)[_linear(grid, idx) == target_lin]
    if len(samp) == 0:
        return 0.0
    if grid.occupied.any():
        shoulder = _pose_shoulder(pose, cap.chain)
        starts = np.broadcast_to(shoulder, (len(samp), 3))
        free = segments_free_batch(grid, starts, pts[samp])
        samp = samp[free]
        if len(samp) == 0:
            return 0.0
    return float(w[samp].max())


def candidate_poses(cap: CapabilityMap, p) -> list[int]:
    """Lattice pose indices that could possibly reach p (complete prefilter)."""
    p = np.asarray(p, float)
    mount_xy = float(np.hypot(*cap.chain.mount.translation[:2]))
    bound = mount_xy + float(np.sum(cap.chain.link_lengths)) \
        + cap.resolution * np.sqrt(3.0)
    out = []
    for k, pose in enumerate(cap.lattice):
        if np.hypot(pose.x - p[0], pose.y - p[1]) <= bound:
            out.append(k)
    return out


_AXIS_CODE = {"z": 0, "y": 1}
_CODE_AXIS = {0: "z", 1: "y"}
_MAGIC = b"CAPM"
_VERSION = 1


def save_capability_map(cap: CapabilityMap, path) -> None:
    """Write the documented little-endian CAPM container."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<3d", *cap.origin))
        f.write(struct.pack("<d", cap.resolution))
        f.write(struct.pack("<3I", *cap.dims))
        f.write(struct.pack("<d", cap.w_threshold))
        f.write(struct.pack("<Q", cap.seed))
        f.write(struct.pack("<I", cap.samples_per_pose))
        ch = cap.chain
        f.write(struct.pack("<I", ch.n_joints))
        for j in range(ch.n_joints):
            f.write(struct.pack("<Bddd", _AXIS_CODE[ch.link_axes[j]],
                                ch.link_lengths[j], ch.joint_limits[j, 0],
                                ch.joint_limits[j, 1]))
        f.write(struct.pack("<9d", *ch.mount.rotation.ravel()))
        f.write(struct.pack("<3d", *ch.mount.translation))
        f.write(struct.pack("<I", len(cap.lattice)))
        for pose in cap.lattice:
            f.write(struct.pack("<3d", pose.x, pose.y, pose.theta))
        reach = cap.reachable
        hints = np.where(cap.best_pose < 0, NO_HINT,
                         cap.best_pose.astype(np.int64)).astype(np.uint32)
        rec = np.zeros(cap.n_voxels,
                       dtype=np.dtype([("flags", "u1"), ("w", "<f8"),
                                       ("hint", "<u4")]))
        rec["flags"] = reach.astype(np.uint8)
        rec["w"] = cap.best_w
        rec["hint"] = hints
        f.write(rec.tobytes())


def load_capability_map(path) -> CapabilityMap:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a capability map file (bad magic)")
    off = 4
    (version,) = struct.unpack_from("<I", data, off); off += 4
    if version != _VERSION:
        raise ValueError(f"unsupported capability map version {version}")
    origin = np.array(struct.unpack_from("<3d", data, off)); off += 24
    (resolution,) = struct.unpack_from("<d", data, off); off += 8
    dims = struct.unpack_from("<3I", data, off); off += 12
    (w_threshold,) = struct.unpack_from("<d", data, off); off += 8
    (seed,) = struct.unpack_from("<Q", data, off); off += 8
    (samples_per_pose,) = struct.unpack_from("<I", data, off); off += 4
    (n_joints,) = struct.unpack_from("<I", data, off); off += 4
    axes, lengths, limits = [], [], []
    for _ in range(n_joints):
        code, length, lo, hi = struct.unpack_from("<Bddd", data, off)
        off += struct.calcsize("<Bddd")
        axes.append(_CODE_AXIS[code])
        lengths.append(length)
        limits.append((lo, hi))
    rot = np.array(struct.unpack_from("<9d", data, off)).reshape(3, 3); off += 72
    trans = np.array(struct.unpack_from("<3d", data, off)); off += 24
    chain = KinematicChain(np.array(lengths), tuple(axes), np.array(limits),
                           Transform(rot, trans))
    (n_lattice,) = struct.unpack_from("<I", data, off); off += 4
    lattice = []
    for _ in range(n_lattice):
        x, y, theta = struct.unpack_from("<3d", data, off); off += 24
        lattice.append(SE2(x, y, theta))
    n_vox = dims[0] * dims[1] * dims[2]
    rec = np.frombuffer(data, offset=off, count=n_vox,
                        dtype=np.dtype([("flags", "u1"), ("w", "<f8"),
                                        ("hint", "<u4")]))
    best_w = rec["w"].astype(np.float64)
    best_pose = np.where(rec["hint"] == NO_HINT, -1,
                         rec["hint"].astype(np.int64)).astype(np.int32)
    return CapabilityMap(origin, resolution, tuple(int(d) for d in dims),
                         lattice, chain, int(seed), int(samples_per_pose),
                         float(w_threshold), best_w, best_pose,
                         np.full(n_vox, -1, dtype=np.int32))
