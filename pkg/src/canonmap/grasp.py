"""Grasp frame construction and target selection strategies.

A grasp frame keeps the gripper approach axis vertical: its z column is the
world up axis, its x column is the horizontal projection of the part's
x-axis, and y completes the right-handed basis (the gripper open/close
direction). Selection strategies: the midpoint of four torso parts, or
whichever part currently sits highest above the plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOrientation, MissingPart
from .geometry import RigidPose

WORLD_UP = (0.0, 0.0, 1.0)
DEFAULT_MID_PARTS = ("belly", "back", "left hand", "right hand")
HORIZONTAL_TOL = 1e-3


@dataclass(frozen=True)
class GraspPose:
    pose: RigidPose
    part: str
    strategy: str

    def to_json(self) -> dict:
        return {"pose": self.pose.to_list(), "part": self.part,
                "strategy": self.strategy}


def _horizontal_basis(x_axis: np.ndarray, y_axis: np.ndarray,
                      z_world: np.ndarray) -> np.ndarray:
    """Rotation with columns [x_g, z_w x x_g, z_w].

    x_g is the unit horizontal projection of the object's x-axis; if that
    projection is shorter than HORIZONTAL_TOL (axis vertical), the object's
    y-axis is used instead; if both are vertical the yaw is undefined.
    """
    for axis in (x_axis, y_axis):
        flat = axis - (axis @ z_world) * z_world
        norm = np.linalg.norm(flat)
        if norm >= HORIZONTAL_TOL:
            x_g = flat / norm
            return np.column_stack([x_g, np.cross(z_world, x_g), z_world])
    raise DegenerateOrientation(
        "object x- and y-axes are both vertical; gripper yaw is undefined")


def grasp_frame(part_pose_world: RigidPose, z_world=WORLD_UP,
                part: str = "", strategy: str = "") -> GraspPose:
    """Grasp frame for one part pose expressed in world coordinates."""
    z_w = np.asarray(z_world, dtype=float)
    z_w = z_w / np.linalg.norm(z_w)
    rot = _horizontal_basis(part_pose_world.rotation[:, 0],
                            part_pose_world.rotation[:, 1], z_w)
    pose = RigidPose.from_rt(rot, part_pose_world.translation, check=False)
    return GraspPose(pose=pose, part=part, strategy=strategy)


def mid_grab_target(part_poses_world: dict[str, RigidPose],
                    object_pose_world: RigidPose,
                    names: tuple[str, ...] = DEFAULT_MID_PARTS,
                    z_world=WORLD_UP) -> GraspPose:
    """Grasp at the mean origin of the named parts, oriented by the object.

    The default part set brackets the torso so the mean lands near the
    middle of the body.
    """
    missing = [n for n in names if n not in part_poses_world]
    if missing:
        raise MissingPart(f"mid grab needs parts {missing}")
    origins = np.stack([part_poses_world[n].translation for n in names])
    center = origins.mean(axis=0)
    z_w = np.asarray(z_world, dtype=float)
    z_w = z_w / np.linalg.norm(z_w)
    rot = _horizontal_basis(object_pose_world.rotation[:, 0],
                            object_pose_world.rotation[:, 1], z_w)
    pose = RigidPose.from_rt(rot, center, check=False)
    return GraspPose(pose=pose, part="mid", strategy="mid")


def highest_part_target(part_poses_world: dict[str, RigidPose],
                        z_world=WORLD_UP) -> GraspPose:
    """Grasp the part whose origin is highest along world up.

    Ties go to the lexicographically smallest part name.
    """
    if not part_poses_world:
        raise MissingPart("highest-part grab needs at least one part pose")
    z_w = np.asarray(z_world, dtype=float)
    z_w = z_w / np.linalg.norm(z_w)
    heights = {name: float(pose.translation @ z_w)
               for name, pose in part_poses_world.items()}
    top = max(heights.values())
    winner = min(name for name, h in heights.items() if h == top)
    return grasp_frame(part_poses_world[winner], z_world=z_w, part=winner,
                       strategy="highest")
