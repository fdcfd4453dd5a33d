"""Synthetic observation generator with full ground truth.

Stands in for a rendering + inference front end: poses the mesh, decides
vertex visibility with a back-face test plus a pixel-grid z-buffer, and
emits noisy per-pixel embeddings and depths together with the true vertex
index, object pose, and part poses for every pixel. Supports per-part
articulation (rigid rotation of a vertex group about its centroid) and
Gaussian surface jitter for deformation studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .correspondence import Observation
from .errors import NothingVisible, SchemaError, UnknownPart, ValidationError
from .geometry import CameraIntrinsics, RigidPose, axis_angle_matrix
from .mesh_core import CanonicalMesh
from .parts import PartDefinition, part_frame
from .spectral import VertexEmbeddingTable


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0,
                            width=640, height=480)


def tabletop_extrinsics(height_m: float = 0.80) -> RigidPose:
    """Camera-to-world pose of a camera looking straight down at the plane.

    World z is up; the camera sits height_m above the origin with its
    optical axis along -z_world and x aligned with x_world.
    """
    rot = np.array([[1.0, 0.0, 0.0],
                    [0.0, -1.0, 0.0],
                    [0.0, 0.0, -1.0]])
    return RigidPose.from_rt(rot, (0.0, 0.0, height_m))


@dataclass
class Articulation:
    part: str
    axis: tuple[float, float, float]
    angle_rad: float

    def to_json(self) -> dict:
        return {"part": self.part, "axis": list(self.axis),
                "angle_rad": self.angle_rad}

    @classmethod
    def from_json(cls, obj: dict) -> "Articulation":
        return cls(part=obj["part"], axis=tuple(obj["axis"]),
                   angle_rad=float(obj["angle_rad"]))


@dataclass
class ScenarioConfig:
    """One synthetic scene: object pose, camera, noise model, articulation."""

    object_pose: RigidPose
    camera: CameraIntrinsics = field(default_factory=default_intrinsics)
    pose_frame: str = "camera"            # "camera" | "world"
    extrinsics: RigidPose | None = None   # camera-to-world, required for "world"
    pixel_budget: int = 400
    embedding_noise: float = 0.0          # per-component std, embedding units
    outlier_rate: float = 0.0
    depth_noise: float = 0.0              # std, meters
    articulations: list[Articulation] = field(default_factory=list)
    deformation_jitter: float = 0.0       # per-vertex std, meters
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValidationError("outlier_rate must be in [0, 1]")
        if min(self.embedding_noise, self.depth_noise,
               self.deformation_jitter) < 0.0:
            raise ValidationError("noise levels must be >= 0")
        if self.pixel_budget < 1:
            raise ValidationError("pixel_budget must be >= 1")
        if self.pose_frame not in ("camera", "world"):
            raise ValidationError(f"unknown pose_frame {self.pose_frame!r}")
        if self.pose_frame == "world" and self.extrinsics is None:
            raise ValidationError("world pose_frame requires extrinsics")

    def object_in_camera(self) -> RigidPose:
        if self.pose_frame == "camera":
            return self.object_pose
        return self.extrinsics.inverse() @ self.object_pose

    def to_json(self) -> dict:
        obj = {
            "object_pose": self.object_pose.to_list(),
            "pose_frame": self.pose_frame,
            "camera": self.camera.to_json(),
            "pixel_budget": self.pixel_budget,
            "embedding_noise": self.embedding_noise,
            "outlier_rate": self.outlier_rate,
            "depth_noise": self.depth_noise,
            "articulations": [a.to_json() for a in self.articulations],
            "deformation_jitter": self.deformation_jitter,
            "rng_seed": self.rng_seed,
        }
        if self.extrinsics is not None:
            obj["extrinsics"] = self.extrinsics.to_list()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioConfig":
        try:
            return cls(
                object_pose=RigidPose.from_list(obj["object_pose"]),
                pose_frame=obj.get("pose_frame", "camera"),
                camera=CameraIntrinsics.from_json(obj["camera"]),
                extrinsics=None if obj.get("extrinsics") is None
                else RigidPose.from_list(obj["extrinsics"]),
                pixel_budget=int(obj.get("pixel_budget", 400)),
                embedding_noise=float(obj.get("embedding_noise", 0.0)),
                outlier_rate=float(obj.get("outlier_rate", 0.0)),
                depth_noise=float(obj.get("depth_noise", 0.0)),
                articulations=[Articulation.from_json(a)
                               for a in obj.get("articulations", [])],
                deformation_jitter=float(obj.get("deformation_jitter", 0.0)),
                rng_seed=int(obj.get("rng_seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad scenario config: {exc}") from exc


@dataclass(frozen=True)
class SyntheticObservation:
    """Observation plus the ground truth that produced it."""

    observation: Observation
    true_vertices: np.ndarray       # (n,) int64
    true_depths: np.ndarray         # (n,) float64, exact
    outlier_flags: np.ndarray       # (n,) bool
    true_object_pose: RigidPose     # object in camera
    true_part_poses: dict           # name -> RigidPose (camera frame)
    config: ScenarioConfig

    def truth_to_json(self) -> dict:
        return {
            "true_vertices": [int(i) for i in self.true_vertices],
            "true_depths": [float(z) for z in self.true_depths],
            "outlier_flags": [bool(b) for b in self.outlier_flags],
            "object_pose": self.true_object_pose.to_list(),
            "part_poses": {name: pose.to_list()
                           for name, pose in self.true_part_poses.items()},
            "scenario": self.config.to_json(),
        }


def vertex_normals(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (normalized; zero rows left at zero)."""
    p0 = positions[faces[:, 0]]
    cross = np.cross(positions[faces[:, 1]] - p0, positions[faces[:, 2]] - p0)
    normals = np.zeros_like(positions)
    for k in range(3):
        np.add.at(normals, faces[:, k], cross)
    norm = np.linalg.norm(normals, axis=1, keepdims=True)
    return np.divide(normals, norm, out=np.zeros_like(normals),
                     where=norm > 0.0)


def _visible_vertices(positions_cam: np.ndarray, faces: np.ndarray,
                      camera: CameraIntrinsics
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(vertex ids, pixels, depths) of visible vertices, ascending vertex id.

    Visibility: in front of the camera, inside the image, normal facing the
    camera, and nearest in its integer pixel cell (vertex-splat z-buffer).
    """
    z = positions_cam[:, 2]
    in_front = z > 1e-9
    if not in_front.any():
        raise NothingVisible("no vertex in front of the camera")
    normals = vertex_normals(positions_cam, faces)
    facing = (normals * positions_cam).sum(axis=1) < 0.0

    pix = np.full((len(z), 2), -1.0)
    pix[in_front] = camera.project(positions_cam[in_front])
    in_image = (in_front
                & (pix[:, 0] >= 0.0) & (pix[:, 0] < camera.width)
                & (pix[:, 1] >= 0.0) & (pix[:, 1] < camera.height))
    cand = np.flatnonzero(in_image & facing)
    if len(cand) == 0:
        raise NothingVisible("no vertex projects into the image")

    cells = (pix[cand, 1].astype(np.int64) * camera.width
             + pix[cand, 0].astype(np.int64))
    # nearest per cell; z then vertex id for a deterministic winner
    order = np.lexsort((cand, z[cand], cells))
    ordered_cells = cells[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = ordered_cells[1:] != ordered_cells[:-1]
    winners = np.sort(cand[order[first]])
    return winners, pix[winners], z[winners]


def sample_visible_vertices(mesh: CanonicalMesh, pose: RigidPose,
                            camera: CameraIntrinsics
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Visible mesh vertices under a rigid pose (no deformation)."""
    return _visible_vertices(pose.apply(mesh.vertices), mesh.faces, camera)


def generate_observation(mesh: CanonicalMesh, table: VertexEmbeddingTable,
                         parts: dict[str, PartDefinition] | None,
                         cfg: ScenarioConfig) -> SyntheticObservation:
    """Produce one synthetic observation with ground truth.

    Deterministic for a fixed rng_seed: jitter, articulation, pixel
    sampling, noise, and outlier draws all come from one seeded generator
    in a fixed order.
    """
    parts = parts or {}
    rng = np.random.default_rng(cfg.rng_seed)
    m = mesh.vertex_count

    positions = np.array(mesh.vertices, dtype=float)
    if cfg.deformation_jitter > 0.0:
        positions += rng.normal(0.0, cfg.deformation_jitter, size=(m, 3))

    articulated_rots: dict[str, np.ndarray] = {}
    for art in cfg.articulations:
        if art.part not in parts:
            raise UnknownPart(f"articulated part {art.part!r} is not defined")
        part = parts[art.part]
        rot = axis_angle_matrix(art.axis, art.angle_rad)
        centroid = part.centroid
        positions[part.members] = (positions[part.members] - centroid) @ rot.T \
            + centroid
        articulated_rots[art.part] = rot

    pose_cam = cfg.object_in_camera()
    vids, pixels, depths = _visible_vertices(pose_cam.apply(positions),
                                             mesh.faces, cfg.camera)

    if len(vids) > cfg.pixel_budget:
        chosen = np.sort(rng.choice(len(vids), size=cfg.pixel_budget,
                                    replace=False))
        vids, pixels, depths = vids[chosen], pixels[chosen], depths[chosen]
    n = len(vids)

    embeddings = np.array(table.embeddings[vids])
    if cfg.embedding_noise > 0.0:
        embeddings += rng.normal(0.0, cfg.embedding_noise,
                                 size=embeddings.shape)
    outliers = rng.random(n) < cfg.outlier_rate
    for i in np.flatnonzero(outliers):
        other = int(rng.integers(0, m - 1))
        if other >= vids[i]:
            other += 1
        embeddings[i] = table.embeddings[other]

    noisy_depths = depths.copy()
    if cfg.depth_noise > 0.0:
        noisy_depths = np.maximum(
            noisy_depths + rng.normal(0.0, cfg.depth_noise, size=n), 1e-6)

    obs = Observation(pixels=pixels, embeddings=embeddings,
                      intrinsics=cfg.camera, depth=noisy_depths,
                      extrinsics=cfg.extrinsics)

    true_part_poses = {}
    for name, part in parts.items():
        frame = part_frame(part).pose
        if name in articulated_rots:
            rot = articulated_rots[name]
            c = part.centroid
            spin = RigidPose.from_rt(rot, c - rot @ c, check=False)
            true_part_poses[name] = pose_cam @ spin @ frame
        else:
            true_part_poses[name] = pose_cam @ frame

    return SyntheticObservation(
        observation=obs, true_vertices=vids, true_depths=depths,
        outlier_flags=outliers, true_object_pose=pose_cam,
        true_part_poses=true_part_poses, config=cfg)


def save_scenario_files(synthetic: SyntheticObservation, obs_path,
                        truth_path) -> None:
    with open(obs_path, "w", encoding="utf-8") as fh:
        json.dump(synthetic.observation.to_json(), fh, sort_keys=True)
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(synthetic.truth_to_json(), fh, sort_keys=True)


def load_truth(path) -> dict:
    try:
        doc = json.loads(open(path, "r", encoding="utf-8").read())
        doc["object_pose"] = RigidPose.from_list(doc["object_pose"])
        doc["part_poses"] = {k: RigidPose.from_list(v)
                             for k, v in doc["part_poses"].items()}
        return doc
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise SchemaError(f"bad truth file {path}: {exc}") from exc
