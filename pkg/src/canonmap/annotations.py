"""Mesh annotation bundle: frame, symmetry, embedding table, geodesic cache.

The annotation file is plain JSON keyed to the mesh via the vertex-buffer
checksum; writes are deterministic (sorted keys, repr floats) so identical
inputs produce byte-identical files. The optional geodesic cache is a flat
binary file: magic "CMGE", little-endian uint32 vertex count, then the
float32 row-major all-pairs distance matrix.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, ValidationError
from .geometry import RigidPose
from .mesh_core import CanonicalMesh, GeodesicTable, SymmetryMap, mesh_checksum
from .spectral import LboSpectrum, VertexEmbeddingTable

ANNOT_SCHEMA = "canonmap-annot-v1"
GEO_CACHE_MAGIC = b"CMGE"


@dataclass(frozen=True)
class MeshAnnotations:
    mesh_checksum: str
    frame_transform: RigidPose
    symmetry: SymmetryMap
    table: VertexEmbeddingTable
    eigenvalues: np.ndarray | None = None


def write_annotations(path, mesh: CanonicalMesh, frame: RigidPose,
                      symmetry: SymmetryMap, table: VertexEmbeddingTable,
                      spectrum: LboSpectrum | None = None) -> None:
    if table.vertex_count != mesh.vertex_count:
        raise ValidationError("embedding table does not match mesh size")
    doc = {
        "schema": ANNOT_SCHEMA,
        "mesh_checksum": mesh_checksum(mesh),
        "vertex_count": mesh.vertex_count,
        "frame_transform": frame.to_list(),
        "symmetry": {
            "axis": symmetry.axis,
            "partner": [int(i) for i in symmetry.partner],
            "residual": [float(r) for r in symmetry.residual],
        },
        "embedding": {
            "provenance": table.provenance,
            "rows": table.vertex_count,
            "cols": table.dimension,
            "data": [float(x) for x in table.embeddings.ravel()],
        },
    }
    if spectrum is not None:
        doc["eigenvalues"] = [float(v) for v in spectrum.eigenvalues]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_annotations(path, mesh: CanonicalMesh | None = None) -> MeshAnnotations:
    """Read an annotation bundle; verifies the checksum when a mesh is given."""
    try:
        doc = json.loads(open(path, "r", encoding="utf-8").read())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read annotations {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != ANNOT_SCHEMA:
        raise SchemaError(f"not a {ANNOT_SCHEMA} document")
    try:
        emb = doc["embedding"]
        table = VertexEmbeddingTable(
            embeddings=np.asarray(emb["data"], dtype=float).reshape(
                int(emb["rows"]), int(emb["cols"])),
            provenance=emb.get("provenance", "imported"))
        sym = doc["symmetry"]
        annotations = MeshAnnotations(
            mesh_checksum=doc["mesh_checksum"],
            frame_transform=RigidPose.from_list(doc["frame_transform"]),
            symmetry=SymmetryMap(
                axis=int(sym["axis"]),
                partner=np.asarray(sym["partner"], dtype=np.int64),
                residual=np.asarray(sym["residual"], dtype=float)),
            table=table,
            eigenvalues=None if "eigenvalues" not in doc
            else np.asarray(doc["eigenvalues"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad annotations document: {exc}") from exc
    if mesh is not None and annotations.mesh_checksum != mesh_checksum(mesh):
        raise ValidationError(
            "annotations were computed for a different mesh (checksum mismatch)")
    if mesh is not None and annotations.table.vertex_count != mesh.vertex_count:
        raise ValidationError("annotation table size does not match mesh")
    return annotations


def save_geodesic_cache(path, table: GeodesicTable) -> None:
    matrix = table.full_matrix()
    with open(path, "wb") as fh:
        fh.write(GEO_CACHE_MAGIC)
        fh.write(struct.pack("<I", matrix.shape[0]))
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def load_geodesic_cache(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != GEO_CACHE_MAGIC:
        raise SchemaError(f"{path} is not a geodesic cache")
    (m,) = struct.unpack_from("<I", data, 4)
    expect = 8 + 4 * m * m
    if len(data) != expect:
        raise SchemaError(
            f"geodesic cache truncated: {len(data)} bytes, expected {expect}")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(m, m).copy()
