"""Forward kinematics, Jacobians and manipulability for serial revolute chains.

Chains are built from yaw (z) and pitch (y) revolute links, each extending
along its local +x axis. With all joints at zero the arm points along +x of
the mount frame. All poses are expressed in the mobile-base frame; the mount
transform places the arm root (shoulder) on the base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, JointLimitError
from .geometry import Transform, rot_y, rot_z
from .world import ArmConfig

SINGULARITY_TOL = 1e-9

_AXIS_VECTORS = {"z": np.array([0.0, 0.0, 1.0]), "y": np.array([0.0, 1.0, 0.0])}


@dataclass
class KinematicChain:
    link_lengths: np.ndarray
    link_axes: tuple[str, ...]
    joint_limits: np.ndarray        # (n, 2)
    mount: Transform
    _task_rank: int | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        if np.any(self.link_lengths <= 0):
            raise ValueError("link lengths must be > 0")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint limits must satisfy min < max")
        if len(self.link_axes) != self.n_joints or len(self.joint_limits) != self.n_joints:
            raise ValueError("links, axes and limits must have equal length")

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths)

    @staticmethod
    def from_config(cfg: ArmConfig) -> "KinematicChain":
        mount = Transform(rot_z(cfg.mount_yaw), np.asarray(cfg.mount_xyz, float))
        return KinematicChain(np.asarray(cfg.link_lengths, float),
                              tuple(cfg.link_axes),
                              np.asarray(cfg.joint_limits, float), mount)

    def validate_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n_joints,):
            raise DimensionMismatch(
                f"expected {self.n_joints} joint values, got shape {q.shape}")
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        if np.any(q < lo - 1e-12) or np.any(q > hi + 1e-12):
            raise JointLimitError(f"joint vector {q.tolist()} violates limits")
        return q

    def clamp_q(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float),
                       self.joint_limits[:, 0], self.joint_limits[:, 1])

    @property
    def task_rank(self) -> int:
        """Structural task-space rank: directions the chain can actuate at all.

        Probed once from Jacobians at fixed sample configurations; a planar
        chain reports 2 even though J has three rows.
        """
        if self._task_rank is None:
            rng = np.random.default_rng(0xA11CE)
            lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
            rank = 0
            for _ in range(16):
                q = lo + rng.random(self.n_joints) * (hi - lo)
                s = np.linalg.svd(jacobian(self, q), compute_uv=False)
                rank = max(rank, int(np.sum(s > SINGULARITY_TOL)))
            self._task_rank = max(rank, 1)
        return self._task_rank


@dataclass(frozen=True)
class ManipulabilityEllipsoid:
    center: np.ndarray              # end-effector position, base frame
    semi_axes: np.ndarray           # 3 values, sorted descending, >= 0
    orientation: np.ndarray         # 3x3 rotation, columns match semi_axes
    w: float                        # manipulability score, 0 at singularities


def _joint_rotation(axis: str, angle: float) -> np.ndarray:
    return rot_z(angle) if axis == "z" else rot_y(angle)


def _fk_frames(chain: KinematicChain, q: np.ndarray):
    """Joint origins, joint axes (world dirs) and end-effector position."""
    rot = chain.mount.rotation.copy()
    pos = chain.mount.translation.copy()
    origins = np.empty((chain.n_joints, 3))
    axes = np.empty((chain.n_joints, 3))
    for j in range(chain.n_joints):
        origins[j] = pos
        axes[j] = rot @ _AXIS_VECTORS[chain.link_axes[j]]
        rot = rot @ _joint_rotation(chain.link_axes[j], q[j])
        pos = pos + rot @ np.array([chain.link_lengths[j], 0.0, 0.0])
    return origins, axes, pos, rot


def forward_kinematics(chain: KinematicChain, q) -> tuple[np.ndarray, np.ndarray]:
    """End-effector (position, rotation) in the mobile-base frame."""
    q = chain.validate_q(q)
    _, _, pos, rot = _fk_frames(chain, q)
    return pos, rot


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """3xn positional Jacobian: column j = axis_j x (ee - origin_j)."""
    q = chain.validate_q(q)
    origins, axes, ee, _ = _fk_frames(chain, q)
    return np.cross(axes, ee - origins).T


def manipulability(chain: KinematicChain, q) -> ManipulabilityEllipsoid:
    """Manipulability ellipsoid of the positional Jacobian at q.

    w is the product of the chain's structurally-attainable singular values
    and is clamped to exactly 0 at singularities (rank drop below the
    structural task rank at tolerance 1e-9).
    """
    q = chain.validate_q(q)
    jac = jacobian(chain, q)
    ee, _ = forward_kinematics(chain, q)
    u, s, _ = np.linalg.svd(jac)         # s descending; u columns = axes
    semi = np.zeros(3)
    semi[:len(s)] = s
    if np.linalg.det(u) < 0:
        u = u.copy()
        u[:, 2] = -u[:, 2]
    m = chain.task_rank
    if semi[m - 1] <= SINGULARITY_TOL:
        w = 0.0
        semi = np.where(semi <= SINGULARITY_TOL, 0.0, semi)
    else:
        w = float(np.prod(semi[:m]))
    return ManipulabilityEllipsoid(ee, semi, u, w)


def reach_distance(chain: KinematicChain) -> tuple[float, float]:
    """(r_min, r_max) distance band reachable from the shoulder.

    Exact annulus for one- and two-link chains; conservative r_min = 0
    otherwise.
    """
    lengths = chain.link_lengths
    r_max = float(np.sum(lengths))
    if chain.n_joints <= 2:
        r_min = max(0.0, 2.0 * float(np.max(lengths)) - r_max)
    else:
        r_min = 0.0
    return r_min, r_max


def fk_batch(chain: KinematicChain, qs: np.ndarray) -> np.ndarray:
    """End-effector positions for a batch of joint vectors, shape (N, 3).

    Same composition as forward_kinematics; tests assert row-wise equality.
    """
    qs = np.asarray(qs, dtype=float)
    n = qs.shape[0]
    rot = np.broadcast_to(chain.mount.rotation, (n, 3, 3)).copy()
    pos = np.broadcast_to(chain.mount.translation, (n, 3)).copy()
    for j in range(chain.n_joints):
        rot = rot @ _rotation_batch(chain.link_axes[j], qs[:, j])
        pos = pos + rot[:, :, 0] * chain.link_lengths[j]
    return pos


def manipulability_w_batch(chain: KinematicChain, qs: np.ndarray) -> np.ndarray:
    """Manipulability score w for a batch of joint vectors, shape (N,)."""
    qs = np.asarray(qs, dtype=float)
    n = qs.shape[0]
    nj = chain.n_joints
    rot = np.broadcast_to(chain.mount.rotation, (n, 3, 3)).copy()
    pos = np.broadcast_to(chain.mount.translation, (n, 3)).copy()
    origins = np.empty((n, nj, 3))
    axes = np.empty((n, nj, 3))
    for j in range(nj):
        origins[:, j] = pos
        axes[:, j] = rot @ _AXIS_VECTORS[chain.link_axes[j]]
        rot = rot @ _rotation_batch(chain.link_axes[j], qs[:, j])
        pos = pos + rot[:, :, 0] * chain.link_lengths[j]
    jac = np.cross(axes, pos[:, None, :] - origins)      # (N, nj, 3)
    s = np.linalg.svd(np.swapaxes(jac, 1, 2), compute_uv=False)
    m = chain.task_rank
    w = np.prod(s[:, :m], axis=1)
    w[np.any(s[:, :m] <= SINGULARITY_TOL, axis=1)] = 0.0
    return w


def _rotation_batch(axis: str, angles: np.ndarray) -> np.ndarray:
    n = len(angles)
    c, s = np.cos(angles), np.sin(angles)
    out = np.zeros((n, 3, 3))
    if axis == "z":
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        out[:, 2, 2] = 1.0
    else:
        out[:, 0, 0] = c
        out[:, 0, 2] = s
        out[:, 1, 1] = 1.0
        out[:, 2, 0] = -s
        out[:, 2, 2] = c
    return out


def refine_to_point(chain: KinematicChain, q0, target, iters: int = 100) -> np.ndarray:
    """Levenberg-Marquardt IK refinement from q0 toward a base-frame point.

    Steps are only accepted when they reduce the position error, so the
    result is never worse than the starting configuration. Joint limits are
    enforced by clamping. Used as the local-search refinement for
    capability-map soundness checks.
    """
    target = np.asarray(target, float)
    q = chain.clamp_q(q0)
    ee, _ = forward_kinematics(chain, q)
    err = target - ee
    cost = np.linalg.norm(err)
    lam = 1e-3
    for _ in range(iters):
        if cost < 1e-10:
            break
        jac = jacobian(chain, q)
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam * np.eye(3), err)
        q_new = chain.clamp_q(q + dq)
        ee_new, _ = forward_kinematics(chain, q_new)
        err_new = target - ee_new
        cost_new = np.linalg.norm(err_new)
        if cost_new < cost:
            q, err, cost = q_new, err_new, cost_new
            lam = max(lam * 0.5, 1e-9)
        else:
            lam = min(lam * 10.0, 1e8)
    return q
