import json

import numpy as np
import pytest

from canonmap import (
    Articulation,
    CameraIntrinsics,
    CanonicalMesh,
    RigidPose,
    ScenarioConfig,
    generate_observation,
    grow_part,
    sample_visible_vertices,
    tabletop_extrinsics,
    vertex_normals,
)
from canonmap.errors import NothingVisible, UnknownPart, ValidationError
from canonmap.meshgen import icosphere

CAM = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0,
                       width=640, height=480)


def test_front_facing_triangle_fully_visible():
    mesh = CanonicalMesh.from_arrays(
        [[-0.1, -0.1, 0.0], [0.1, -0.1, 0.0], [0.0, 0.1, 0.0]],
        [[0, 2, 1]])  # wound so the normal faces -z (toward the camera)
    pose = RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.5))
    vids, pixels, depths = sample_visible_vertices(mesh, pose, CAM)
    assert len(vids) == 3
    np.testing.assert_allclose(depths, 0.5)


def test_sphere_visibility_fraction(ico642):
    # a convex body shows the cap with normals toward the camera: the
    # visible fraction is (1 - R/d)/2, close to one half for d >> R
    pose = RigidPose.from_rt(np.eye(3), (0.0, 0.0, 20.0))
    vids, _, _ = sample_visible_vertices(ico642, pose, CAM)
    frac = len(vids) / ico642.vertex_count
    assert 0.45 <= frac <= 0.55


def test_zbuffer_keeps_nearer_vertex():
    # two triangles on the same viewing rays (far one scaled so each far
    # vertex projects into the exact pixel cell of its near counterpart)
    def backproject(u, v, z):
        return [(u - CAM.cx) * z / CAM.fx, (v - CAM.cy) * z / CAM.fy, z]

    pix = [(200.5, 180.5), (420.5, 180.5), (320.5, 390.5)]
    near = [backproject(u, v, 0.5) for u, v in pix]
    far = [backproject(u, v, 0.7) for u, v in pix]
    verts = np.asarray(near + far) - (0.0, 0.0, 0.5)  # canonical frame
    faces = [[0, 2, 1], [3, 5, 4], [0, 1, 3], [1, 4, 3]]
    mesh = CanonicalMesh.from_arrays(verts, faces)
    pose = RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.5))
    vids, _, depths = sample_visible_vertices(mesh, pose, CAM)
    assert {0, 1, 2} <= set(vids.tolist())
    assert not ({3, 4, 5} & set(vids.tolist()))


def test_nothing_visible_behind_camera(blob162):
    pose = RigidPose.from_rt(np.eye(3), (0.0, 0.0, -1.0))
    with pytest.raises(NothingVisible):
        sample_visible_vertices(blob162, pose, CAM)


def test_noiseless_observation_is_exact(blob162, blob162_table):
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)),
        camera=CAM, pixel_budget=100, rng_seed=0)
    syn = generate_observation(blob162, blob162_table, {}, cfg)
    np.testing.assert_array_equal(
        syn.observation.embeddings,
        blob162_table.embeddings[syn.true_vertices])
    np.testing.assert_array_equal(syn.observation.depth, syn.true_depths)
    assert not syn.outlier_flags.any()


def test_all_outliers_when_rate_one(blob162, blob162_table):
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)),
        camera=CAM, pixel_budget=50, outlier_rate=1.0, rng_seed=1)
    syn = generate_observation(blob162, blob162_table, {}, cfg)
    assert syn.outlier_flags.all()
    # every outlier embedding is some other vertex's row
    for i in range(len(syn.true_vertices)):
        row = syn.observation.embeddings[i]
        match = np.flatnonzero(
            (blob162_table.embeddings == row).all(axis=1))
        assert len(match) == 1
        assert match[0] != syn.true_vertices[i]


def test_fixed_seed_bitwise_identical(blob162, blob162_table):
    cfg = dict(object_pose=RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)),
               camera=CAM, pixel_budget=80, embedding_noise=0.05,
               outlier_rate=0.2, depth_noise=0.002, deformation_jitter=0.001,
               rng_seed=12)
    a = generate_observation(blob162, blob162_table, {},
                             ScenarioConfig(**cfg))
    b = generate_observation(blob162, blob162_table, {},
                             ScenarioConfig(**cfg))
    assert json.dumps(a.observation.to_json(), sort_keys=True) == \
        json.dumps(b.observation.to_json(), sort_keys=True)
    assert json.dumps(a.truth_to_json(), sort_keys=True) == \
        json.dumps(b.truth_to_json(), sort_keys=True)


def test_ground_truth_consistency(blob162, blob162_table):
    from canonmap import unproject_pixels
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.01, -0.02, 0.65)),
        camera=CAM, pixel_budget=120, rng_seed=3)
    syn = generate_observation(blob162, blob162_table, {}, cfg)
    points_cam = unproject_pixels(syn.observation)
    canonical = syn.true_object_pose.inverse().apply(points_cam)
    np.testing.assert_allclose(canonical,
                               blob162.vertices[syn.true_vertices],
                               atol=1e-9)


def test_articulation_preserves_internal_distances(blob162, blob162_table,
                                                   tmp_path):
    from canonmap import GeodesicTable, build_edge_graph
    geo = GeodesicTable(build_edge_graph(blob162))
    seed = int(np.argmax(blob162.vertices[:, 0]))
    part = grow_part(blob162, geo, seed, 0.06, "arm")
    art = Articulation(part="arm", axis=(0.0, 1.0, 0.0),
                       angle_rad=np.deg2rad(35))
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)),
        camera=CAM, pixel_budget=10_000, rng_seed=4, articulations=[art])
    syn = generate_observation(blob162, blob162_table, {"arm": part}, cfg)
    # pick observed pixels whose true vertices are part members
    member_rows = np.flatnonzero(np.isin(syn.true_vertices, part.members))
    assert len(member_rows) >= 2, "articulated part must be visible here"
    rays = CAM.ray_directions(syn.observation.pixels[member_rows])
    cam_pts = syn.true_depths[member_rows, None] * rays
    # rigid group rotation: pairwise distances match the canonical part
    truth = blob162.vertices[syn.true_vertices[member_rows]]
    d_obs = np.linalg.norm(cam_pts[:, None] - cam_pts[None, :], axis=-1)
    d_can = np.linalg.norm(truth[:, None] - truth[None, :], axis=-1)
    np.testing.assert_allclose(d_obs, d_can, atol=1e-12)


def test_unknown_articulated_part(blob162, blob162_table):
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)),
        camera=CAM, rng_seed=0,
        articulations=[Articulation("ghost", (0, 0, 1), 0.3)])
    with pytest.raises(UnknownPart):
        generate_observation(blob162, blob162_table, {}, cfg)


def test_config_validation():
    pose = RigidPose.identity()
    with pytest.raises(ValidationError):
        ScenarioConfig(object_pose=pose, outlier_rate=1.5)
    with pytest.raises(ValidationError):
        ScenarioConfig(object_pose=pose, embedding_noise=-1.0)
    with pytest.raises(ValidationError):
        ScenarioConfig(object_pose=pose, pose_frame="world")


def test_world_frame_pose_resolution(blob162, blob162_table):
    extr = tabletop_extrinsics(0.8)
    world_pose = RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.05))
    cfg = ScenarioConfig(object_pose=world_pose, pose_frame="world",
                         extrinsics=extr, camera=CAM, rng_seed=0)
    cam_pose = cfg.object_in_camera()
    expected = extr.inverse() @ world_pose
    assert cam_pose.almost_equal(expected)
    # the camera looks straight down from 0.8 m: the object sits 0.75 m ahead
    assert cam_pose.translation[2] == pytest.approx(0.75)


def test_scenario_config_json_round_trip():
    cfg = ScenarioConfig(
        object_pose=RigidPose.from_rt(np.eye(3), (0.1, 0.2, 0.7)),
        camera=CAM, pixel_budget=123, embedding_noise=0.4, outlier_rate=0.1,
        depth_noise=0.01, deformation_jitter=0.002, rng_seed=9,
        extrinsics=tabletop_extrinsics(),
        articulations=[Articulation("arm", (0.0, 0.0, 1.0), 0.5)])
    clone = ScenarioConfig.from_json(cfg.to_json())
    assert clone.to_json() == cfg.to_json()


def test_vertex_normals_unit_sphere(ico642):
    normals = vertex_normals(ico642.vertices, ico642.faces)
    # icosphere normals point radially outward
    cos = (normals * ico642.vertices).sum(axis=1)
    assert cos.min() > 0.99
