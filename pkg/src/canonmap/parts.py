"""Named vertex groups grown from seed vertices by geodesic threshold.

A part is { i : geodesic(seed, i) <= threshold }. A single-vertex part
(threshold 0) is a grasp point. The parts file stores seed and threshold as
the source of truth and the member list as a cache that is recomputed and
checked on load; a checksum over the mesh vertex buffer detects definitions
authored against a different mesh.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicatePart,
    InvalidSeed,
    SchemaError,
    StaleDefinition,
    UnknownPart,
    ValidationError,
)
from .geometry import RigidPose
from .mesh_core import CanonicalMesh, GeodesicTable, mesh_checksum

logger = logging.getLogger(__name__)

PARTS_SCHEMA = "canonmap-parts-v1"


@dataclass(frozen=True)
class PartDefinition:
    name: str
    seed: int
    threshold_m: float
    members: np.ndarray        # sorted int64 vertex indices, includes seed
    centroid: np.ndarray       # (3,) canonical frame, meters
    meta: dict | None = None   # reserved, opaque to this package

    def to_json(self) -> dict:
        obj = {"name": self.name, "seed": int(self.seed),
               "threshold_m": float(self.threshold_m),
               "members": [int(i) for i in self.members]}
        if self.meta is not None:
            obj["meta"] = self.meta
        return obj


@dataclass(frozen=True)
class PartFrame:
    """Canonical-frame part pose: origin at the centroid, parent orientation."""

    pose: RigidPose


def grow_part(mesh: CanonicalMesh, geodesics: GeodesicTable, seed: int,
              threshold_m: float, name: str,
              meta: dict | None = None) -> PartDefinition:
    """Members are every vertex within geodesic threshold of the seed."""
    if not 0 <= seed < mesh.vertex_count:
        raise InvalidSeed(f"seed {seed} out of range [0, {mesh.vertex_count})")
    if threshold_m < 0.0 or not np.isfinite(threshold_m):
        raise ValidationError(f"threshold must be >= 0, got {threshold_m}")
    if not name:
        raise ValidationError("part name must be nonempty")
    members = geodesics.ball(seed, threshold_m)
    centroid = mesh.vertices[members].mean(axis=0)
    return PartDefinition(name=name, seed=seed, threshold_m=float(threshold_m),
                          members=members, centroid=centroid, meta=meta)


def part_frame(part: PartDefinition) -> PartFrame:
    """Origin at the member centroid, orientation equal to the parent's."""
    return PartFrame(pose=RigidPose.from_rt(np.eye(3), part.centroid,
                                            check=False))


class PartRegistry:
    """Name-keyed part store. Reads are lock-free snapshots; mutations are
    serialized through a single writer lock."""

    def __init__(self, mesh: CanonicalMesh, geodesics: GeodesicTable):
        self.mesh = mesh
        self.geodesics = geodesics
        self.checksum = mesh_checksum(mesh)
        self._parts: dict[str, PartDefinition] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._parts)

    def __contains__(self, name: str) -> bool:
        return name in self._parts

    def get(self, name: str) -> PartDefinition:
        try:
            return self._parts[name]
        except KeyError:
            raise UnknownPart(f"no part named {name!r}") from None

    def names(self) -> list[str]:
        return list(self._parts.keys())

    def snapshot(self) -> list[PartDefinition]:
        return list(self._parts.values())

    def define(self, name: str, seed: int, threshold_m: float,
               meta: dict | None = None) -> PartDefinition:
        with self._lock:
            if name in self._parts:
                raise DuplicatePart(f"part {name!r} already defined")
            part = grow_part(self.mesh, self.geodesics, seed, threshold_m,
                             name, meta)
            self._parts[name] = part
            return part

    def remove(self, name: str) -> None:
        with self._lock:
            if name not in self._parts:
                raise UnknownPart(f"no part named {name!r}")
            del self._parts[name]


def save_parts(registry: PartRegistry, path) -> None:
    """Atomic write (temp file + rename) of the registry."""
    doc = {
        "schema": PARTS_SCHEMA,
        "mesh_checksum": registry.checksum,
        "parts": [p.to_json() for p in registry.snapshot()],
    }
    payload = json.dumps(doc, indent=1, sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_parts(path, mesh: CanonicalMesh, geodesics: GeodesicTable,
               rewrite: bool = True) -> PartRegistry:
    """Load a parts file and revalidate it against the current mesh.

    A checksum mismatch raises StaleDefinition. Member lists are recomputed
    from seed+threshold; if a cached list disagrees (hand-edited file), the
    recomputed members win and the file is rewritten unless rewrite=False.
    """
    try:
        doc = json.loads(open(path, "r", encoding="utf-8").read())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read parts file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != PARTS_SCHEMA:
        raise SchemaError(f"not a {PARTS_SCHEMA} document")

    checksum = mesh_checksum(mesh)
    if doc.get("mesh_checksum") != checksum:
        raise StaleDefinition(
            f"parts file checksum {doc.get('mesh_checksum')} does not match "
            f"mesh checksum {checksum}")

    registry = PartRegistry(mesh, geodesics)
    dirty = False
    for entry in doc.get("parts", []):
        try:
            name = entry["name"]
            seed = int(entry["seed"])
            threshold = float(entry["threshold_m"])
            cached = np.asarray(entry.get("members", []), dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad part entry: {exc}") from exc
        try:
            part = registry.define(name, seed, threshold,
                                   meta=entry.get("meta"))
        except InvalidSeed as exc:
            raise StaleDefinition(str(exc)) from exc
        if not np.array_equal(cached, part.members):
            logger.warning("part %r: cached members stale, recomputed "
                           "(%d -> %d vertices)", name, len(cached),
                           len(part.members))
            dirty = True
    if dirty and rewrite:
        save_parts(registry, path)
    return registry
