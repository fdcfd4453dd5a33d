"""Shared fixtures: meshes, embedding tables, and part sets.

Session-scoped because spectral tables are the expensive bit; everything
here is deterministic so sharing across tests is safe.
"""

from __future__ import annotations

import numpy as np
import pytest

from canonmap import (
    GeodesicTable,
    PipelineConfig,
    build_edge_graph,
    grow_part,
    lbo_embeddings,
)
from canonmap.meshgen import icosphere, warped_sphere


@pytest.fixture(scope="session")
def ico642():
    return icosphere(3)


@pytest.fixture(scope="session")
def ico642_spectrum(ico642):
    return lbo_embeddings(ico642, d=16)


@pytest.fixture(scope="session")
def blob162():
    """Small asymmetric mesh; spectral rows are unique per vertex."""
    return warped_sphere(2, scale=0.12)


@pytest.fixture(scope="session")
def blob162_table(blob162):
    return lbo_embeddings(blob162, d=16)[0]


@pytest.fixture(scope="session")
def blob642():
    """Asymmetric end-to-end test mesh, ~10 cm scale."""
    return warped_sphere(3, scale=0.12)


@pytest.fixture(scope="session")
def blob642_table(blob642):
    return lbo_embeddings(blob642, d=16)[0]


@pytest.fixture(scope="session")
def blob642_geo(blob642):
    return GeodesicTable(build_edge_graph(blob642))


@pytest.fixture(scope="session")
def blob642_parts(blob642, blob642_geo):
    """Six extremity parts named after the usual grasp targets."""
    v = blob642.vertices
    seeds = {
        "right hand": int(np.argmax(v[:, 0])),
        "left hand": int(np.argmin(v[:, 0])),
        "back": int(np.argmax(v[:, 2])),
        "belly": int(np.argmin(v[:, 2])),
        "right foot": int(np.argmax(v[:, 1])),
        "left foot": int(np.argmin(v[:, 1])),
    }
    return [grow_part(blob642, blob642_geo, seed, 0.045, name)
            for name, seed in seeds.items()]


@pytest.fixture(scope="session")
def exact_match_config(blob642_table):
    """Pipeline thresholds for noiseless scenarios: keep exact hits only.

    The default data-relative thresholds deliberately keep several nearby
    candidates per pixel (robust under noise); with zero noise that blending
    shifts targets off the true vertices, so noiseless accuracy tests gate
    at a tiny fraction of the table's NN distance instead.
    """
    unit = blob642_table.median_nn_distance
    return PipelineConfig(theta0=1e-6 * unit, theta1=unit)


def floyd_warshall_oracle(graph) -> np.ndarray:
    """Dense all-pairs shortest paths, straight from the textbook recursion."""
    m = graph.vertex_count
    dist = np.full((m, m), np.inf)
    np.fill_diagonal(dist, 0.0)
    e, w = graph.edges, graph.lengths
    dist[e[:, 0], e[:, 1]] = w
    dist[e[:, 1], e[:, 0]] = w
    for k in range(m):
        np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :], out=dist)
    return dist
