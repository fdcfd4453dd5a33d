"""canonmap: dense pixel-to-vertex correspondences on a canonical mesh,
object and part 6D pose recovery, and grasp frame synthesis.

Typical flow: parse and annotate a mesh (frame, symmetry, spectral vertex
embeddings), define named vertex groups by geodesic growth, then match
per-pixel embeddings against the vertex table and fit rigid transforms for
the whole object and each part. A synthetic observation generator with full
ground truth drives the evaluation harness.
"""

from .annotations import (
    MeshAnnotations,
    load_annotations,
    load_geodesic_cache,
    save_geodesic_cache,
    write_annotations,
)
from .correspondence import (
    FilteredCorrespondences,
    MatchCandidates,
    MatchMask,
    Observation,
    aggregate_targets,
    filter_matches,
    topk_vertex_candidates,
)
from .geometry import (
    CameraIntrinsics,
    RigidPose,
    axis_angle_matrix,
    pose_errors,
    rotation_angle,
    rotation_angle_between,
)
from .grasp import (
    DEFAULT_MID_PARTS,
    GraspPose,
    grasp_frame,
    highest_part_target,
    mid_grab_target,
)
from .mesh_core import (
    CanonicalMesh,
    EdgeGraph,
    GeodesicTable,
    SymmetryMap,
    assign_canonical_frame,
    build_edge_graph,
    compute_symmetry_map,
    geodesic_from_seed,
    mesh_checksum,
    parse_mesh,
)
from .parts import (
    PartDefinition,
    PartFrame,
    PartRegistry,
    grow_part,
    load_parts,
    part_frame,
    save_parts,
)
from .pose import (
    PipelineConfig,
    PoseResult,
    estimate_depths_pairwise,
    fit_rigid_transform,
    fit_similarity_transform,
    solve_poses,
    unproject_pixels,
)
from .report import EvalSetup, TrialReport, run_evaluation, write_report
from .spectral import (
    LboSpectrum,
    VertexEmbeddingTable,
    cotangent_laplacian,
    import_embeddings,
    lbo_embeddings,
)
from .synth import (
    Articulation,
    ScenarioConfig,
    SyntheticObservation,
    generate_observation,
    sample_visible_vertices,
    tabletop_extrinsics,
    vertex_normals,
)

__version__ = "0.1.0"

__all__ = [
    "Articulation",
    "CameraIntrinsics",
    "CanonicalMesh",
    "DEFAULT_MID_PARTS",
    "EdgeGraph",
    "EvalSetup",
    "FilteredCorrespondences",
    "GeodesicTable",
    "GraspPose",
    "LboSpectrum",
    "MatchCandidates",
    "MatchMask",
    "MeshAnnotations",
    "Observation",
    "PartDefinition",
    "PartFrame",
    "PartRegistry",
    "PipelineConfig",
    "PoseResult",
    "RigidPose",
    "ScenarioConfig",
    "SymmetryMap",
    "SyntheticObservation",
    "TrialReport",
    "VertexEmbeddingTable",
    "aggregate_targets",
    "assign_canonical_frame",
    "axis_angle_matrix",
    "build_edge_graph",
    "compute_symmetry_map",
    "cotangent_laplacian",
    "estimate_depths_pairwise",
    "filter_matches",
    "fit_rigid_transform",
    "fit_similarity_transform",
    "generate_observation",
    "geodesic_from_seed",
    "grasp_frame",
    "grow_part",
    "highest_part_target",
    "import_embeddings",
    "lbo_embeddings",
    "load_annotations",
    "load_geodesic_cache",
    "load_parts",
    "mesh_checksum",
    "mid_grab_target",
    "parse_mesh",
    "part_frame",
    "pose_errors",
    "rotation_angle",
    "rotation_angle_between",
    "run_evaluation",
    "sample_visible_vertices",
    "save_geodesic_cache",
    "save_parts",
    "solve_poses",
    "tabletop_extrinsics",
    "topk_vertex_candidates",
    "unproject_pixels",
    "vertex_normals",
    "write_annotations",
    "write_report",
]
