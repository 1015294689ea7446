"""Small rigid-transform helpers used by kinematics, perception and agents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class Transform:
    """Rigid transform: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def apply_batch(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "Transform") -> "Transform":
        """self after other: (self ∘ other)(p) = self(other(p))."""
        return Transform(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Transform":
        rt = self.rotation.T
        return Transform(rt, -rt @ self.translation)


@dataclass(frozen=True)
class SE2:
    """Planar pose of the mobile base: position on the floor plus heading."""

    x: float
    y: float
    theta: float

    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_transform(self, z: float = 0.0) -> Transform:
        """Lift to a 3-D rigid transform (rotation about z at height z)."""
        return Transform(rot_z(self.theta), np.array([self.x, self.y, z]))

    def distance_to(self, other: "SE2") -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


def is_rotation(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        return False
    return (np.allclose(m @ m.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(m) - 1.0) < 1e-6)
