"""Pixel-to-vertex matching: candidate search, outlier masking, aggregation.

Given per-pixel embedding vectors and the per-vertex table, this module
produces one canonical-frame 3D target point per surviving pixel:

1. for each pixel, the K vertices with smallest embedding distance,
2. a binary mask combining an absolute distance gate (theta0) with a
   per-pixel spread gate against the row median (theta1),
3. the mean position of the masked-in candidate vertices, optionally
   restricted to a vertex subset (part membership).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCorrespondenceSet,
    MissingDepth,
    NonPositiveDepth,
    SchemaError,
    ValidationError,
)
from .geometry import CameraIntrinsics, RigidPose
from .mesh_core import CanonicalMesh
from .spectral import VertexEmbeddingTable

_BLOCK = 256  # pixel rows per distance-matrix block


@dataclass
class Observation:
    """Foreground pixels with embeddings, optional depth, and camera model."""

    pixels: np.ndarray                 # (n, 2) float, (u, v)
    embeddings: np.ndarray             # (n, d) float
    intrinsics: CameraIntrinsics
    depth: np.ndarray | None = None    # (n,) float, meters, > 0
    extrinsics: RigidPose | None = None  # camera-to-world

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        self.embeddings = np.asarray(self.embeddings, dtype=float)
        n = len(self.pixels)
        if n < 1:
            raise ValidationError("observation needs at least one pixel")
        if self.pixels.shape != (n, 2):
            raise ValidationError(f"pixels must be (n, 2), got {self.pixels.shape}")
        if self.embeddings.shape[0] != n or self.embeddings.ndim != 2:
            raise ValidationError("embeddings must align with pixels")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=float)
            if self.depth.shape != (n,):
                raise ValidationError("depth must be one value per pixel")
            if np.any(self.depth <= 0.0) or not np.all(np.isfinite(self.depth)):
                raise NonPositiveDepth("depth entries must be finite and > 0")

    @property
    def pixel_count(self) -> int:
        return len(self.pixels)

    def to_json(self) -> dict:
        n, d = self.embeddings.shape
        obj = {
            "pixels": [[float(u), float(v)] for u, v in self.pixels],
            "embeddings": {"rows": n, "cols": d,
                           "data": [float(x) for x in self.embeddings.ravel()]},
            "intrinsics": self.intrinsics.to_json(),
        }
        if self.depth is not None:
            obj["depth"] = [float(z) for z in self.depth]
        if self.extrinsics is not None:
            obj["extrinsics"] = self.extrinsics.to_list()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Observation":
        try:
            emb = obj["embeddings"]
            table = np.asarray(emb["data"], dtype=float).reshape(
                int(emb["rows"]), int(emb["cols"]))
            return cls(
                pixels=np.asarray(obj["pixels"], dtype=float),
                embeddings=table,
                intrinsics=CameraIntrinsics.from_json(obj["intrinsics"]),
                depth=None if obj.get("depth") is None
                else np.asarray(obj["depth"], dtype=float),
                extrinsics=None if obj.get("extrinsics") is None
                else RigidPose.from_list(obj["extrinsics"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad observation document: {exc}") from exc


@dataclass(frozen=True)
class MatchCandidates:
    """Top-K vertex candidates per pixel, ascending embedding distance."""

    indices: np.ndarray    # (n, K) int64
    distances: np.ndarray  # (n, K) float64, nondecreasing along rows

    @property
    def k(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class MatchMask:
    """Elementwise keep/reject decisions over the candidate matrix."""

    mask: np.ndarray        # (n, K) bool
    kept_counts: np.ndarray  # (n,) int64


@dataclass(frozen=True)
class FilteredCorrespondences:
    """Per-pixel mean target points for pixels with surviving candidates."""

    kept_pixels: np.ndarray        # (k,) pixel indices into the observation
    target_points: np.ndarray      # (k, 3) canonical-frame meters
    source_vertex_sets: list = field(repr=False)  # per kept pixel, int64 array
    dropped_pixels: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    @property
    def count(self) -> int:
        return len(self.kept_pixels)


def topk_vertex_candidates(obs: Observation, table: VertexEmbeddingTable,
                           k: int) -> MatchCandidates:
    """Exact brute-force K nearest vertex embeddings per pixel.

    Distances are Euclidean in embedding space; ties are broken toward the
    lower vertex index. Blocked over pixels to bound the distance matrix.
    """
    emb = obs.embeddings
    verts = table.embeddings
    if emb.shape[1] != verts.shape[1]:
        raise DimensionMismatch(
            f"pixel embedding dim {emb.shape[1]} != table dim {verts.shape[1]}")
    m = len(verts)
    if not 1 <= k <= m:
        raise ValidationError(f"K must be in [1, {m}], got {k}")

    n = len(emb)
    vert_sq = (verts ** 2).sum(axis=1)
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k))
    for start in range(0, n, _BLOCK):
        block = emb[start:start + _BLOCK]
        sq = ((block ** 2).sum(axis=1)[:, None] + vert_sq[None, :]
              - 2.0 * block @ verts.T)
        np.maximum(sq, 0.0, out=sq)
        # stable sort on distances == ascending-index tie-break
        order = np.argsort(sq, axis=1, kind="stable")[:, :k]
        # the expanded form selects fast but cancels poorly near zero;
        # recompute the k winning distances exactly and re-sort the row
        exact = np.linalg.norm(block[:, None, :] - verts[order], axis=2)
        reorder = np.argsort(exact, axis=1, kind="stable")
        indices[start:start + _BLOCK] = np.take_along_axis(order, reorder,
                                                           axis=1)
        distances[start:start + _BLOCK] = np.take_along_axis(exact, reorder,
                                                             axis=1)
    return MatchCandidates(indices=indices, distances=distances)


def filter_matches(cand: MatchCandidates, theta0: float,
                   theta1: float) -> MatchMask:
    """Keep candidates that pass both gates.

    Gate 0 drops candidates at embedding distance >= theta0. Gate 1 drops
    candidates more than theta1 above the median of their own pixel's row
    (even row lengths use the mean of the two middle values).
    """
    if theta0 <= 0.0 or theta1 <= 0.0:
        raise ValidationError("theta0 and theta1 must be positive")
    d = cand.distances
    med = np.median(d, axis=1, keepdims=True)
    mask = (d < theta0) & ((d - med) < theta1)
    return MatchMask(mask=mask, kept_counts=mask.sum(axis=1).astype(np.int64))


def aggregate_targets(mesh: CanonicalMesh, cand: MatchCandidates,
                      mask: MatchMask,
                      restrict_to: np.ndarray | None = None
                      ) -> FilteredCorrespondences:
    """Mean canonical position of the kept candidates of each pixel.

    With restrict_to, a candidate must additionally belong to the given
    vertex set (part membership); pixels left with no candidate are dropped
    and reported. Raises EmptyCorrespondenceSet when nothing survives.
    """
    if mask.mask.shape != cand.indices.shape:
        raise ValidationError("mask shape does not match candidates")
    eff = mask.mask
    if restrict_to is not None:
        allowed = np.zeros(mesh.vertex_count, dtype=bool)
        allowed[np.asarray(restrict_to, dtype=np.int64)] = True
        eff = eff & allowed[cand.indices]

    counts = eff.sum(axis=1)
    kept = np.flatnonzero(counts > 0)
    if len(kept) == 0:
        raise EmptyCorrespondenceSet("no pixel has a surviving candidate")
    positions = mesh.vertices[cand.indices[kept]]          # (k, K, 3)
    weights = eff[kept][:, :, None].astype(float)
    targets = (positions * weights).sum(axis=1) / counts[kept, None]
    sources = [cand.indices[i][eff[i]] for i in kept]
    return FilteredCorrespondences(
        kept_pixels=kept,
        target_points=targets,
        source_vertex_sets=sources,
        dropped_pixels=np.flatnonzero(counts == 0),
    )


def require_depth(obs: Observation) -> np.ndarray:
    if obs.depth is None:
        raise MissingDepth("observation carries no depth channel")
    return obs.depth
