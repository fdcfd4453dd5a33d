"""HTTP backend for the interactive part-selection UI.

Loopback JSON-over-HTTP service: read-only mesh geometry, geodesic-ball
queries, and parts CRUD. Geodesic groups are computed by the exact same
code path the CLI and pipeline use, so the UI preview can never drift from
what ends up in the parts file. Parts mutations persist immediately with an
atomic write.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .annotations import MeshAnnotations, load_annotations
from .errors import (
    CanonmapError,
    DuplicatePart,
    InvalidSeed,
    UnknownPart,
    ValidationError,
)
from .mesh_core import CanonicalMesh, GeodesicTable, build_edge_graph, \
    mesh_checksum, parse_mesh
from .parts import PartRegistry, grow_part, load_parts, save_parts


@dataclass
class SessionState:
    """One loaded mesh plus its mutable parts registry."""

    mesh: CanonicalMesh
    geodesics: GeodesicTable
    registry: PartRegistry
    parts_path: str
    checksum: str
    annotations: MeshAnnotations | None = None


class NotLoaded(Exception):
    """No mesh loaded into this server instance."""


def build_session(mesh_path, parts_path,
                  annotations_path=None) -> SessionState:
    """Load mesh (+ optional annotations) and the parts file if present."""
    mesh = parse_mesh(mesh_path)
    geodesics = GeodesicTable(build_edge_graph(mesh))
    if Path(parts_path).exists():
        registry = load_parts(parts_path, mesh, geodesics)
    else:
        registry = PartRegistry(mesh, geodesics)
    annotations = None
    if annotations_path is not None:
        annotations = load_annotations(annotations_path, mesh)
    return SessionState(mesh=mesh, geodesics=geodesics, registry=registry,
                        parts_path=str(parts_path),
                        checksum=mesh_checksum(mesh), annotations=annotations)


def _error(status: int, err: Exception) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": type(err).__name__,
                                 "message": str(err)})


def create_app(state: SessionState | None,
               frontend_dir=None) -> FastAPI:
    """Build the service; state=None answers 503 everywhere (not loaded)."""
    app = FastAPI(title="canonmap part selector", docs_url=None,
                  redoc_url=None)

    @app.exception_handler(CanonmapError)
    async def canonmap_error_handler(request: Request, exc: CanonmapError):
        if isinstance(exc, (InvalidSeed, ValidationError)):
            return _error(400, exc)
        if isinstance(exc, UnknownPart):
            return _error(404, exc)
        if isinstance(exc, DuplicatePart):
            return _error(409, exc)
        return _error(500, exc)

    def session() -> SessionState:
        if state is None:
            raise NotLoaded("no mesh loaded")
        return state

    @app.exception_handler(NotLoaded)
    async def not_loaded_handler(request: Request, exc: NotLoaded):
        return _error(503, exc)

    @app.get("/api/mesh")
    async def get_mesh():
        s = session()
        lo, hi = s.mesh.bounding_box()
        return {
            "vertex_count": s.mesh.vertex_count,
            "face_count": s.mesh.face_count,
            "vertices": [float(x) for x in s.mesh.vertices.ravel()],
            "faces": [int(i) for i in s.mesh.faces.ravel()],
            "checksum": s.checksum,
            "bbox": {"min": [float(x) for x in lo],
                     "max": [float(x) for x in hi]},
        }

    @app.post("/api/geodesic-group")
    async def geodesic_group(request: Request):
        s = session()
        body = await request.json()
        try:
            seed = int(body["seed"])
            threshold = float(body["threshold_m"])
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, ValidationError(f"bad request body: {exc}"))
        part = grow_part(s.mesh, s.geodesics, seed, threshold, "preview")
        return {"members": [int(i) for i in part.members],
                "centroid": [float(x) for x in part.centroid]}

    @app.get("/api/parts")
    async def get_parts():
        s = session()
        return {"mesh_checksum": s.checksum,
                "parts": [p.to_json() for p in s.registry.snapshot()]}

    @app.post("/api/parts")
    async def post_part(request: Request):
        s = session()
        body = await request.json()
        try:
            name = str(body["name"])
            seed = int(body["seed"])
            threshold = float(body["threshold_m"])
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, ValidationError(f"bad request body: {exc}"))
        part = s.registry.define(name, seed, threshold, meta=body.get("meta"))
        save_parts(s.registry, s.parts_path)
        return JSONResponse(status_code=201, content=part.to_json())

    @app.delete("/api/parts/{name}")
    async def delete_part(name: str):
        s = session()
        s.registry.remove(name)
        save_parts(s.registry, s.parts_path)
        return {"removed": name}

    if frontend_dir is not None:
        app.mount("/assets", StaticFiles(directory=frontend_dir),
                  name="assets")

        @app.get("/")
        async def index():
            return FileResponse(f"{frontend_dir}/index.html")

    return app
