"""Rigid transforms, pinhole intrinsics, and rotation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ORTHONORMAL_TOL = 1e-9


class RigidPose:
    """4x4 homogeneous rigid transform.

    The rotation block must be orthonormal with det +1 (checked to 1e-9 on
    construction) and the bottom row (0, 0, 0, 1). The matrix is read-only
    once built; compose with ``@`` and invert with :meth:`inverse`.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix, check: bool = True):
        m = np.array(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValidationError(f"pose matrix must be 4x4, got {m.shape}")
        if check:
            _check_rigid(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("RigidPose is immutable")

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(4), check=False)

    @classmethod
    def from_rt(cls, rotation, translation, check: bool = True) -> "RigidPose":
        m = np.eye(4)
        m[:3, :3] = np.asarray(rotation, dtype=float)
        m[:3, 3] = np.asarray(translation, dtype=float)
        return cls(m, check=check)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> "RigidPose":
        r = self.matrix[:3, :3]
        t = self.matrix[:3, 3]
        return RigidPose.from_rt(r.T, -r.T @ t, check=False)

    def __matmul__(self, other: "RigidPose") -> "RigidPose":
        if not isinstance(other, RigidPose):
            return NotImplemented
        return RigidPose(self.matrix @ other.matrix, check=False)

    def apply(self, points) -> np.ndarray:
        """Transform one 3-vector or an (n, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.matrix[:3, :3].T + self.matrix[:3, 3]

    def almost_equal(self, other: "RigidPose", tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol)

    def to_list(self) -> list:
        """Row-major flat list of 16 floats (the JSON wire form)."""
        return [float(x) for x in self.matrix.ravel()]

    @classmethod
    def from_list(cls, values, check: bool = True) -> "RigidPose":
        arr = np.asarray(values, dtype=float)
        if arr.size != 16:
            raise ValidationError(f"pose needs 16 values, got {arr.size}")
        return cls(arr.reshape(4, 4), check=check)

    def __repr__(self):
        t = self.translation
        return f"RigidPose(t=[{t[0]:.4g}, {t[1]:.4g}, {t[2]:.4g}])"


def _check_rigid(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise ValidationError("pose matrix contains NaN/inf")
    if np.max(np.abs(m[3] - (0.0, 0.0, 0.0, 1.0))) > ORTHONORMAL_TOL:
        raise ValidationError("pose bottom row must be (0, 0, 0, 1)")
    r = m[:3, :3]
    if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHONORMAL_TOL:
        raise ValidationError("rotation block is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
        raise ValidationError("rotation block must have det +1")


def rotation_angle(rotation: np.ndarray) -> float:
    """Rotation angle in radians: arccos((trace(R) - 1) / 2).

    Evaluated in atan2 form, c = (trace-1)/2 and s = ||R - R^T||_F / (2 sqrt 2),
    which is the same angle but keeps full precision for tiny rotations
    where arccos saturates near 1.
    """
    r = np.asarray(rotation)[:3, :3]
    c = (np.trace(r) - 1.0) / 2.0
    s = np.linalg.norm(r - r.T) / (2.0 * np.sqrt(2.0))
    return float(np.arctan2(s, c))


def rotation_angle_between(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic distance between two rotations, in radians.

    This is the single rotation-error metric used across the package:
    angle = arccos((trace(R1^T R2) - 1) / 2).
    """
    return rotation_angle(np.asarray(r1).T @ np.asarray(r2))


def pose_errors(estimate: RigidPose, truth: RigidPose) -> tuple[float, float]:
    """(rotation error rad, translation error m) between two poses."""
    rot = rotation_angle_between(estimate.rotation, truth.rotation)
    trans = float(np.linalg.norm(estimate.translation - truth.translation))
    return rot, trans


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValidationError("rotation axis must be nonzero")
    x, y, z = a / n
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point must lie inside the image")

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """Project (n, 3) camera-frame points to (n, 2) pixel coordinates."""
        p = np.asarray(points_cam, dtype=float)
        z = p[:, 2]
        return np.stack([self.fx * p[:, 0] / z + self.cx,
                         self.fy * p[:, 1] / z + self.cy], axis=1)

    def ray_directions(self, pixels: np.ndarray) -> np.ndarray:
        """Per-pixel ray with unit z; depth d puts the point at d * ray."""
        px = np.asarray(pixels, dtype=float)
        return np.stack([(px[:, 0] - self.cx) / self.fx,
                         (px[:, 1] - self.cy) / self.fy,
                         np.ones(len(px))], axis=1)

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, obj: dict) -> "CameraIntrinsics":
        try:
            return cls(fx=float(obj["fx"]), fy=float(obj["fy"]),
                       cx=float(obj["cx"]), cy=float(obj["cy"]),
                       width=int(obj["width"]), height=int(obj["height"]))
        except KeyError as exc:
            from .errors import SchemaError
            raise SchemaError(f"intrinsics missing field {exc}") from exc
