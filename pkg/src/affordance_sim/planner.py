"""Mobile-base motion planning: 8-connected A* over a dilated floor grid,
with the capability map supplying feasible terminal base poses."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .affordance import CapabilityMap, candidate_poses, pose_reaches
from .errors import InvalidStart, OutOfBounds
from .geometry import SE2
from .world import SceneObject, ObjectState, VoxelGrid


@dataclass
class NavGrid:
    """2-D projection of the voxel grid over the robot height band,
    dilated by the footprint radius. Cell (ix, iy) shares the voxel grid's
    xy geometry."""

    origin: np.ndarray            # xy
    resolution: float
    dims: tuple[int, int]
    blocked: np.ndarray           # bool (nx, ny)
    footprint_radius: float

    @staticmethod
    def from_world(grid: VoxelGrid, height_band: tuple[float, float],
                   footprint_radius: float) -> "NavGrid":
        occ2d = grid.occupied_columns(height_band)
        r_cells = int(math.floor(footprint_radius / grid.resolution + 1e-9))
        if r_cells > 0:
            dx, dy = np.meshgrid(np.arange(-r_cells, r_cells + 1),
                                 np.arange(-r_cells, r_cells + 1),
                                 indexing="ij")
            disk = (dx ** 2 + dy ** 2) * grid.resolution ** 2 \
                <= footprint_radius ** 2 + 1e-12
            blocked = ndimage.binary_dilation(occ2d, structure=disk)
        else:
            blocked = occ2d.copy()
        return NavGrid(grid.origin[:2].copy(), grid.resolution,
                       grid.dims[:2], blocked, footprint_radius)

    def cell_of(self, xy) -> tuple[int, int]:
        xy = np.asarray(xy, float)
        i = np.floor((xy - self.origin) / self.resolution).astype(int)
        i = np.minimum(i, np.array(self.dims) - 1)
        if np.any(i < 0) or np.any(i >= np.array(self.dims)):
            raise OutOfBounds(f"xy {xy.tolist()} outside navigation grid")
        return (int(i[0]), int(i[1]))

    def center_of(self, cell) -> np.ndarray:
        return self.origin + (np.asarray(cell) + 0.5) * self.resolution

    def linear(self, cell) -> int:
        return cell[0] * self.dims[1] + cell[1]

    def is_blocked(self, cell) -> bool:
        return bool(self.blocked[cell[0], cell[1]])


@dataclass
class Trajectory:
    """Base-pose path plus the terminal pose from which the grasp is feasible."""

    waypoints: list[SE2]          # after start; terminal pose is last (if any)
    terminal: SE2
    target_object_id: int
    grasp_voxel: tuple[int, int, int]
    cost: float


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _astar(nav: NavGrid, start: tuple[int, int],
           goals: set[tuple[int, int]]) -> tuple[list[tuple[int, int]], float] | None:
    """8-connected A*, Euclidean heuristic, f-ties broken by lower cell index.

    Returns (cells from start to reached goal inclusive, cost) or None.
    """
    res = nav.resolution
    goal_centers = np.array([nav.center_of(g) for g in goals])

    def heuristic(cell) -> float:
        c = nav.center_of(cell)
        return float(np.min(np.linalg.norm(goal_centers - c, axis=1)))

    g_cost: dict[tuple[int, int], float] = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    heap: list = [(heuristic(start), nav.linear(start), start)]
    diag = res * math.sqrt(2.0)
    while heap:
        f, _, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell in goals:
            path = [cell]
            while cell in parent:
                cell = parent[cell]
                path.append(cell)
            path.reverse()
            return path, g_cost[path[-1]]
        cg = g_cost[cell]
        for dx, dy in _NEIGHBORS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if (nxt[0] < 0 or nxt[1] < 0 or nxt[0] >= nav.dims[0]
                    or nxt[1] >= nav.dims[1]):
                continue
            if nav.blocked[nxt[0], nxt[1]] or nxt in closed:
                continue
            ng = cg + (diag if dx != 0 and dy != 0 else res)
            if ng < g_cost.get(nxt, math.inf):
                g_cost[nxt] = ng
                parent[nxt] = cell
                heapq.heappush(heap, (ng + heuristic(nxt), nav.linear(nxt), nxt))
    return None


def plan(grid: VoxelGrid, cap: CapabilityMap, nav: NavGrid, start: SE2,
         target, target_object_id: int = -1) -> Trajectory | None:
    """Shortest collision-free base path to a lattice pose that reaches target.

    Returns None (NotFound) when no feasible terminal pose is connected to
    the start. A start pose that already reaches the target yields a
    zero-waypoint trajectory.
    """
    target = np.asarray(target, float)
    if not grid.in_bounds(target):
        raise OutOfBounds(f"plan target {target.tolist()} outside grid")
    grasp_voxel = grid.world_to_voxel(target)
    start_cell = nav.cell_of(start.xy())
    if nav.is_blocked(start_cell):
        raise InvalidStart(f"start pose {start} is inside a blocked cell")

    if pose_reaches(cap, grid, start, target) > cap.w_threshold:
        return Trajectory([], start, target_object_id, grasp_voxel, 0.0)

    # feasible terminal poses, grouped by nav cell; best w wins within a cell
    cell_pose: dict[tuple[int, int], tuple[float, int]] = {}
    for k in candidate_poses(cap, target):
        pose = cap.lattice[k]
        w = pose_reaches(cap, grid, pose, target)
        if w <= cap.w_threshold:
            continue
        cell = nav.cell_of(pose.xy())
        if nav.is_blocked(cell):
            continue
        prev = cell_pose.get(cell)
        if prev is None or w > prev[0]:
            cell_pose[cell] = (w, k)
    if not cell_pose:
        return None

    found = _astar(nav, start_cell, set(cell_pose))
    if found is None:
        return None
    cells, cost = found
    _, pose_idx = cell_pose[cells[-1]]
    terminal = cap.lattice[pose_idx]

    waypoints: list[SE2] = []
    for i in range(1, len(cells)):
        c = nav.center_of(cells[i])
        d = nav.center_of(cells[i]) - nav.center_of(cells[i - 1])
        waypoints.append(SE2(float(c[0]), float(c[1]),
                             math.atan2(float(d[1]), float(d[0]))))
    if waypoints:
        waypoints[-1] = terminal
    return Trajectory(waypoints, terminal, target_object_id, grasp_voxel, cost)


def replan_target(O, objects: dict[int, SceneObject] | None,
                  exclude, robot_xy) -> int | None:
    """Nearest detected Free un-binned object, excluding ids in `exclude`.

    Distance is planar (base motion); ties break to the lower object id.
    """
    exclude = set(exclude) if not isinstance(exclude, (int, np.integer)) \
        else {int(exclude)}
    robot_xy = np.asarray(robot_xy, float)[:2]
    best: tuple[float, int] | None = None
    for oid in O.ids():
        if oid in exclude:
            continue
        if objects is not None:
            obj = objects.get(oid)
            if obj is None or obj.state is not ObjectState.FREE:
                continue
        pos = O.position(oid)
        d = float(np.linalg.norm(pos[:2] - robot_xy))
        if best is None or (d, oid) < best:
            best = (d, oid)
    return best[1] if best else None


def default_base_lattice(nav: NavGrid, spacing: float = 0.2,
                         headings: int = 8) -> list[SE2]:
    """Lattice over unblocked cells at the given spacing, fanned by headings."""
    step = max(1, int(round(spacing / nav.resolution)))
    out = []
    for ix in range(0, nav.dims[0], step):
        for iy in range(0, nav.dims[1], step):
            if nav.blocked[ix, iy]:
                continue
            c = nav.center_of((ix, iy))
            for h in range(headings):
                theta = -math.pi + (2 * math.pi) * h / headings
                out.append(SE2(float(c[0]), float(c[1]), theta))
    return out
