"""Cotangent Laplace operator and spectral per-vertex embeddings.

The per-vertex feature table used for pixel matching is built from the
smallest nontrivial eigenfunctions of the surface Laplacian: row i is
(phi_1(i)/sqrt(l_1), ..., phi_d(i)/sqrt(l_d)). The scaling damps higher
frequencies the way diffusion distances do, and the constant mode is dropped.
An externally computed table can be imported instead and flows through the
pipeline identically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh
from scipy.spatial import cKDTree

from .errors import DegenerateTriangle, EigensolveFailure, ValidationError
from .mesh_core import CanonicalMesh

logger = logging.getLogger(__name__)

DENSE_SOLVER_MAX_VERTICES = 5000


@dataclass
class VertexEmbeddingTable:
    """m x d table of per-vertex embedding vectors.

    provenance is "spectral" for tables produced here and "imported" for
    externally supplied ones; both are validated the same way.
    """

    embeddings: np.ndarray
    provenance: str = "spectral"

    def __post_init__(self):
        e = np.asarray(self.embeddings, dtype=float)
        if e.ndim != 2 or e.shape[1] < 2:
            raise ValidationError(
                f"embedding table must be (m, d>=2), got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValidationError("embedding table contains NaN/inf")
        if self.provenance not in ("spectral", "imported"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        e.setflags(write=False)
        self.embeddings = e

    @property
    def vertex_count(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dimension(self) -> int:
        return self.embeddings.shape[1]

    @cached_property
    def median_nn_distance(self) -> float:
        """Median over vertices of the distance to the nearest other row.

        This is the natural length unit of the table; match thresholds
        default to multiples of it so they survive embedding rescaling.
        """
        d, _ = cKDTree(self.embeddings).query(self.embeddings, k=2)
        return float(np.median(d[:, 1]))


@dataclass(frozen=True)
class LboSpectrum:
    """Eigenpairs of the generalized problem L phi = lambda M phi."""

    eigenvalues: np.ndarray     # (d+1,) ascending, >= 0, units 1/m^2
    eigenfunctions: np.ndarray  # (m, d+1) M-orthonormal columns


def cotangent_laplacian(mesh: CanonicalMesh) -> tuple[sparse.csr_matrix,
                                                      sparse.dia_matrix]:
    """Stiffness matrix L and lumped mass matrix M.

    L is symmetric positive semidefinite with zero row sums; the weight of
    edge (i, j) is (cot a + cot b)/2 over the one or two incident triangle
    angles opposite the edge. M is diagonal with one third of the incident
    triangle area per vertex. Negative edge weights (obtuse pairs) are legal
    and only logged. Zero-area faces raise DegenerateTriangle.
    """
    v, f = mesh.vertices, mesh.faces
    m = mesh.vertex_count
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    double_area = np.linalg.norm(cross, axis=1)
    if np.any(double_area <= 0.0):
        raise DegenerateTriangle(int(np.argmax(double_area <= 0.0)))

    # cot at corner c = dot of the two adjacent edges / (2 * area)
    cot = np.empty((len(f), 3))
    cot[:, 0] = ((p1 - p0) * (p2 - p0)).sum(axis=1) / double_area
    cot[:, 1] = ((p2 - p1) * (p0 - p1)).sum(axis=1) / double_area
    cot[:, 2] = ((p0 - p2) * (p1 - p2)).sum(axis=1) / double_area

    # corner k weights the opposite edge
    rows = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    cols = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    w = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    weights = sparse.csr_matrix((w, (rows, cols)), shape=(m, m))
    weights = weights + weights.T

    negative = int(np.count_nonzero(weights.data < 0.0)) // 2
    if negative:
        logger.info("cotangent weights: %d negative edge weights (obtuse pairs)",
                    negative)

    stiffness = sparse.diags(np.asarray(weights.sum(axis=1)).ravel()) - weights
    area = double_area / 2.0
    mass_diag = np.zeros(m)
    for k in range(3):
        np.add.at(mass_diag, f[:, k], area / 3.0)
    if np.any(mass_diag <= 0.0):
        raise DegenerateTriangle(int(np.argmax(mass_diag <= 0.0)),
                                 "vertex with nonpositive lumped mass")
    return stiffness.tocsr(), sparse.diags(mass_diag)


def lbo_embeddings(mesh: CanonicalMesh, d: int = 16
                   ) -> tuple[VertexEmbeddingTable, LboSpectrum]:
    """Spectral embedding table from the d+1 smallest Laplacian eigenpairs.

    Uses a dense symmetric solver up to DENSE_SOLVER_MAX_VERTICES vertices
    and shift-inverted Lanczos above. Eigenfunction signs are canonicalized
    (largest-magnitude entry positive) so repeated runs agree bit-for-bit.
    """
    m = mesh.vertex_count
    if d + 1 > m:
        raise ValidationError(f"d+1={d + 1} eigenpairs requested on {m} vertices")
    if d < 2:
        raise ValidationError("embedding dimension must be >= 2")
    stiffness, mass = cotangent_laplacian(mesh)
    mass_diag = mass.diagonal()

    if m <= DENSE_SOLVER_MAX_VERTICES:
        inv_sqrt = 1.0 / np.sqrt(mass_diag)
        sym = stiffness.toarray() * inv_sqrt[:, None] * inv_sqrt[None, :]
        sym = (sym + sym.T) / 2.0
        try:
            evals, evecs = eigh(sym, subset_by_index=[0, d])
        except np.linalg.LinAlgError as exc:
            raise EigensolveFailure(f"dense eigensolve failed: {exc}") from exc
        funcs = evecs * inv_sqrt[:, None]
    else:
        # shift slightly below zero: L itself is singular at the constant mode
        shift = -1e-6 * stiffness.diagonal().mean()
        try:
            evals, funcs = eigsh(stiffness, k=d + 1, M=mass, sigma=shift,
                                 which="LM")
        except ArpackNoConvergence as exc:
            raise EigensolveFailure(
                f"Lanczos did not converge: {len(exc.eigenvalues)}/{d + 1} "
                f"eigenpairs", iterations=getattr(exc, "iterations", None)) from exc
        except (ArpackError, RuntimeError) as exc:
            raise EigensolveFailure(f"sparse eigensolve failed: {exc}") from exc
        order = np.argsort(evals)
        evals, funcs = evals[order], funcs[:, order]

    if abs(evals[0]) > 1e-8 * max(evals[1], np.finfo(float).tiny):
        raise EigensolveFailure(
            f"constant mode missing: lambda_0={evals[0]:.3e}, "
            f"lambda_1={evals[1]:.3e}")
    evals = np.maximum(evals, 0.0)

    # canonical signs: entry of largest magnitude is positive
    flip = funcs[np.argmax(np.abs(funcs), axis=0), np.arange(d + 1)] < 0.0
    funcs = funcs * np.where(flip, -1.0, 1.0)

    table = funcs[:, 1:] / np.sqrt(evals[1:])
    spectrum = LboSpectrum(eigenvalues=evals, eigenfunctions=funcs)
    return VertexEmbeddingTable(embeddings=table, provenance="spectral"), spectrum


def import_embeddings(values, vertex_count: int) -> VertexEmbeddingTable:
    """Validate an externally supplied m x d table against the mesh size."""
    table = VertexEmbeddingTable(np.asarray(values, dtype=float),
                                 provenance="imported")
    if table.vertex_count != vertex_count:
        raise ValidationError(
            f"embedding rows ({table.vertex_count}) != mesh vertices "
            f"({vertex_count})")
    return table
