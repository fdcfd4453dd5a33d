"""Rigid pose recovery from filtered pixel-vertex correspondences.

The least-squares fit solves V' = Rt X' for camera-frame points X' and
canonical target points V'. That solver transform maps camera points into
the canonical frame; the object pose in the camera is its inverse, and both
are exposed because mixing them up is the classic integration bug.

Depth for unprojection comes from the sensor, or, in depth-free mode, from a
Gauss-Newton fit that makes pairwise distances between the unprojected
points match the distances between their canonical targets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .correspondence import (
    FilteredCorrespondences,
    Observation,
    aggregate_targets,
    filter_matches,
    require_depth,
    topk_vertex_candidates,
)
from .errors import (
    ConvergenceFailure,
    DegenerateConfiguration,
    EmptyCorrespondenceSet,
    InsufficientPixels,
    NonPositiveDepth,
)
from .geometry import RigidPose
from .mesh_core import CanonicalMesh
from .parts import PartDefinition, part_frame
from .spectral import VertexEmbeddingTable

logger = logging.getLogger(__name__)


def unproject_pixels(obs: Observation,
                     kept: np.ndarray | None = None) -> np.ndarray:
    """Pinhole unprojection of (a subset of) the observation's pixels.

    x = ((u - cx) z / fx, (v - cy) z / fy, z), camera frame, z forward.
    """
    depth = require_depth(obs)
    idx = np.arange(obs.pixel_count) if kept is None else np.asarray(kept)
    z = depth[idx]
    if np.any(z <= 0.0):
        raise NonPositiveDepth("depth must be positive for unprojection")
    k = obs.intrinsics
    u, v = obs.pixels[idx, 0], obs.pixels[idx, 1]
    return np.stack([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z], axis=1)


def estimate_depths_pairwise(obs: Observation, corr: FilteredCorrespondences,
                             *, d_min: float = 0.05, max_iter: int = 100,
                             rel_tol: float = 1e-10, all_pairs_max: int = 200,
                             pair_budget_factor: int = 20,
                             rng_seed: int = 0) -> np.ndarray:
    """Depth-free per-pixel depth recovery for the kept pixels.

    Minimizes sum over a pair set P of
        (|| d_i r_i - d_j r_j || - || v_i - v_j ||)^2
    where r_i is the pixel ray with unit z, so d_i is the usual z-depth.
    Gauss-Newton with Levenberg damping, depths initialized at 1.0 m and
    boxed at d_min by step projection. P is all pairs up to all_pairs_max
    kept pixels and pair_budget_factor * n seeded random pairs beyond that.

    For narrow fields of view the objective has mirror basins: the point set
    reflected across the mean viewing direction nearly preserves pairwise
    distances. Each descent is therefore followed by descents from the
    reflected-and-reprojected iterate while that improves the cost. Beyond
    all_pairs_max pixels the sampled-pair objective gains further spurious
    minima, so a strided subset is solved first with all pairs and the rigid
    fit to that subset provides the warm start for the full problem.
    """
    n = corr.count
    if n < 4:
        raise InsufficientPixels(f"pairwise depth solve needs >= 4 pixels, got {n}")
    rays = obs.intrinsics.ray_directions(obs.pixels[corr.kept_pixels])
    targets = corr.target_points

    if n <= all_pairs_max:
        ii, jj = np.triu_indices(n, k=1)
        start = np.ones(n)
    else:
        rng = np.random.default_rng(rng_seed)
        count = pair_budget_factor * n
        ii = rng.integers(0, n, size=count)
        jj = rng.integers(0, n - 1, size=count)
        jj = np.where(jj >= ii, jj + 1, jj)
        subset = np.unique(np.linspace(0, n - 1, all_pairs_max).round()
                           .astype(np.int64))
        sub_ii, sub_jj = np.triu_indices(len(subset), k=1)
        sub_depths = _mirror_chain_descent(
            rays[subset], targets[subset], sub_ii, sub_jj,
            np.ones(len(subset)), d_min, max_iter, rel_tol)[0]
        pose, _ = fit_rigid_transform(sub_depths[:, None] * rays[subset],
                                      targets[subset])
        predicted = pose.inverse().apply(targets)
        start = np.maximum(predicted[:, 2], d_min)

    best, best_cost, converged, iterations = _mirror_chain_descent(
        rays, targets, ii, jj, start, d_min, max_iter, rel_tol)
    if not converged:
        raise ConvergenceFailure(
            f"pairwise depth solve did not converge in {max_iter} iterations",
            best=best,
            diagnostics={"iterations": iterations, "cost": best_cost})
    return best


def _mirror_chain_descent(rays, targets, ii, jj, start, d_min, max_iter,
                          rel_tol, max_flips: int = 4):
    """Levenberg-damped Gauss-Newton plus mirror restarts (see caller)."""
    ell = np.linalg.norm(targets[ii] - targets[jj], axis=1)
    n = len(rays)

    def cost_and_parts(d):
        x = d[:, None] * rays
        diff = x[ii] - x[jj]
        dist = np.linalg.norm(diff, axis=1)
        resid = dist - ell
        return float(resid @ resid), diff, dist, resid

    def descend(d0, check_rank):
        depths = np.maximum(d0, d_min)
        cost, diff, dist, resid = cost_and_parts(depths)
        mu = 1e-6
        converged = False
        iterations = 0
        for iterations in range(1, max_iter + 1):
            safe = np.maximum(dist, 1e-12)
            gi = (diff * rays[ii]).sum(axis=1) / safe
            gj = -(diff * rays[jj]).sum(axis=1) / safe

            jtj = np.zeros((n, n))
            np.add.at(jtj, (ii, ii), gi * gi)
            np.add.at(jtj, (jj, jj), gj * gj)
            np.add.at(jtj, (ii, jj), gi * gj)
            np.add.at(jtj, (jj, ii), gi * gj)
            grad = np.zeros(n)
            np.add.at(grad, ii, gi * resid)
            np.add.at(grad, jj, gj * resid)

            if check_rank and iterations == 1:
                eigs = np.linalg.eigvalsh(jtj)
                if eigs[-1] <= 0.0 or eigs[0] < 1e-12 * eigs[-1]:
                    raise ConvergenceFailure(
                        "rank-deficient depth system (coincident or "
                        "degenerate rays)",
                        best=depths,
                        diagnostics={"iterations": 0, "cost": cost,
                                     "eig_min": float(eigs[0]),
                                     "eig_max": float(eigs[-1])})

            prev_cost = cost
            accepted = False
            for _ in range(20):
                try:
                    step = np.linalg.solve(jtj + mu * np.eye(n), -grad)
                except np.linalg.LinAlgError:
                    mu *= 10.0
                    continue
                trial = np.maximum(depths + step, d_min)
                trial_cost, t_diff, t_dist, t_resid = cost_and_parts(trial)
                if trial_cost < cost:
                    depths, cost = trial, trial_cost
                    diff, dist, resid = t_diff, t_dist, t_resid
                    mu = max(mu / 3.0, 1e-12)
                    accepted = True
                    break
                mu *= 10.0
            if not accepted:
                # damping exhausted: flat gradient means we are at a minimum
                converged = bool(np.linalg.norm(grad) < 1e-9 * max(1.0, cost))
                break
            if cost < 1e-24 or abs(prev_cost - cost) < rel_tol * max(cost, 1e-30):
                converged = True
                break
        return depths, cost, converged, iterations

    def mirrored(depths):
        points = depths[:, None] * rays
        axis = rays.mean(axis=0)
        axis /= np.linalg.norm(axis)
        center = points.mean(axis=0)
        reflected = points - 2.0 * ((points - center) @ axis)[:, None] * axis
        return (reflected * rays).sum(axis=1) / (rays * rays).sum(axis=1)

    depths, cost, converged, total_iters = descend(start, check_rank=True)
    for _ in range(max_flips):
        if cost < 1e-24:
            break
        alt, alt_cost, alt_ok, alt_iters = descend(mirrored(depths),
                                                   check_rank=False)
        total_iters += alt_iters
        if alt_cost < cost:
            depths, cost, converged = alt, alt_cost, alt_ok
        else:
            break
    return depths, cost, converged, total_iters


def fit_rigid_transform(camera_points: np.ndarray,
                        target_points: np.ndarray) -> tuple[RigidPose, float]:
    """Closed-form least-squares rigid fit: targets ~= R x + t.

    Centroid alignment plus SVD of the cross-covariance with determinant
    correction (no scale). Returns the transform and the rms residual.
    Raises DegenerateConfiguration when the point set is too thin for a
    stable rotation (smallest singular value < 1e-9 of the largest).
    """
    x = np.asarray(camera_points, dtype=float)
    v = np.asarray(target_points, dtype=float)
    if x.shape != v.shape or x.ndim != 2 or x.shape[1] != 3:
        raise DegenerateConfiguration(
            f"point sets must both be (n, 3), got {x.shape} and {v.shape}")
    if len(x) < 3:
        raise DegenerateConfiguration(f"rigid fit needs >= 3 points, got {len(x)}")

    x_mean = x.mean(axis=0)
    v_mean = v.mean(axis=0)
    cross = (x - x_mean).T @ (v - v_mean)
    u, s, wt = np.linalg.svd(cross)
    if s[0] <= 0.0 or s[2] < 1e-9 * s[0]:
        raise DegenerateConfiguration(
            f"near-degenerate configuration: singular values {s}")
    sign = np.sign(np.linalg.det(wt.T @ u.T))
    rot = wt.T @ np.diag([1.0, 1.0, sign]) @ u.T
    trans = v_mean - rot @ x_mean
    resid = v - (x @ rot.T + trans)
    rms = float(np.sqrt((resid ** 2).sum(axis=1).mean()))
    return RigidPose.from_rt(rot, trans, check=False), rms


def fit_similarity_transform(camera_points: np.ndarray,
                             target_points: np.ndarray
                             ) -> tuple[RigidPose, float, float]:
    """Rigid fit plus a uniform scale (for deformable-volume studies).

    Returns (pose with unit-scale rotation, scale, rms of scaled fit).
    """
    x = np.asarray(camera_points, dtype=float)
    v = np.asarray(target_points, dtype=float)
    pose, _ = fit_rigid_transform(x, v)
    xc = x - x.mean(axis=0)
    vc = v - v.mean(axis=0)
    denom = (xc ** 2).sum()
    scale = float((vc * (xc @ pose.rotation.T)).sum() / denom)
    trans = v.mean(axis=0) - scale * pose.rotation @ x.mean(axis=0)
    resid = v - (scale * x @ pose.rotation.T + trans)
    rms = float(np.sqrt((resid ** 2).sum(axis=1).mean()))
    return RigidPose.from_rt(pose.rotation, trans, check=False), scale, rms


@dataclass
class PipelineConfig:
    """Tunables for the end-to-end solve."""

    k: int = 5
    theta0: float | None = None      # absolute; default 5 x table NN median
    theta1: float | None = None      # absolute; default 1 x table NN median
    theta0_rel: float = 5.0
    theta1_rel: float = 1.0
    depth_mode: str = "sensor"       # "sensor" | "pairwise"
    min_part_pixels: int = 10
    d_min: float = 0.05
    rng_seed: int = 0
    all_pairs_max: int = 200
    pair_budget_factor: int = 20

    def resolve_thresholds(self, table: VertexEmbeddingTable) -> tuple[float, float]:
        unit = table.median_nn_distance
        theta0 = self.theta0 if self.theta0 is not None else self.theta0_rel * unit
        theta1 = self.theta1 if self.theta1 is not None else self.theta1_rel * unit
        return theta0, theta1


@dataclass(frozen=True)
class PartPoseEstimate:
    name: str
    pose: RigidPose          # part frame in camera coordinates
    mode: str                # "fitted" | "rigid-fallback"
    pixels: int
    residual_rms: float = 0.0

    def to_json(self) -> dict:
        return {"name": self.name, "pose": self.pose.to_list(),
                "mode": self.mode, "pixels": self.pixels}


@dataclass(frozen=True)
class PoseResult:
    """Object pose, solver transform, and per-part poses for one observation."""

    object_pose: RigidPose       # object in camera
    solver_transform: RigidPose  # camera points -> canonical frame
    residual_rms: float
    inlier_count: int
    part_poses: list = field(default_factory=list)

    def part(self, name: str) -> PartPoseEstimate:
        for entry in self.part_poses:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "object_pose": self.object_pose.to_list(),
            "solver_transform": self.solver_transform.to_list(),
            "residual_rms": self.residual_rms,
            "inlier_count": self.inlier_count,
            "parts": [p.to_json() for p in self.part_poses],
        }


def solve_poses(obs: Observation, mesh: CanonicalMesh,
                table: VertexEmbeddingTable,
                parts: list[PartDefinition] | None = None,
                config: PipelineConfig | None = None) -> PoseResult:
    """Full pipeline: match, mask, aggregate, unproject, fit, per-part refit.

    Parts with fewer than config.min_part_pixels surviving pixels fall back
    to the rigid assumption: their pose is the object pose composed with the
    part's canonical frame, flagged "rigid-fallback".
    """
    parts = parts or []
    cfg = config or PipelineConfig()
    theta0, theta1 = cfg.resolve_thresholds(table)

    cand = topk_vertex_candidates(obs, table, cfg.k)
    mask = filter_matches(cand, theta0, theta1)
    corr = aggregate_targets(mesh, cand, mask)

    if cfg.depth_mode == "sensor":
        camera_points = unproject_pixels(obs, corr.kept_pixels)
        depth_by_pixel = None
    elif cfg.depth_mode == "pairwise":
        depths = estimate_depths_pairwise(
            obs, corr, d_min=cfg.d_min, rng_seed=cfg.rng_seed,
            all_pairs_max=cfg.all_pairs_max,
            pair_budget_factor=cfg.pair_budget_factor)
        rays = obs.intrinsics.ray_directions(obs.pixels[corr.kept_pixels])
        camera_points = depths[:, None] * rays
        depth_by_pixel = dict(zip(corr.kept_pixels.tolist(), range(corr.count)))
    else:
        raise ValueError(f"unknown depth_mode {cfg.depth_mode!r}")

    solver_transform, rms = fit_rigid_transform(camera_points,
                                                corr.target_points)
    object_pose = solver_transform.inverse()

    part_results = []
    for part in parts:
        canon_frame = part_frame(part).pose
        try:
            sub = aggregate_targets(mesh, cand, mask, restrict_to=part.members)
            n_px = sub.count
        except EmptyCorrespondenceSet:
            sub, n_px = None, 0
        if sub is None or n_px < cfg.min_part_pixels:
            part_results.append(PartPoseEstimate(
                name=part.name, pose=object_pose @ canon_frame,
                mode="rigid-fallback", pixels=n_px))
            continue
        if cfg.depth_mode == "sensor":
            sub_points = unproject_pixels(obs, sub.kept_pixels)
        else:
            # part-kept pixels are a subset of the object-stage kept pixels,
            # so estimated depths are reused rather than re-solved per part
            rows = np.asarray([depth_by_pixel[int(p)] for p in sub.kept_pixels])
            sub_points = camera_points[rows]
        part_rt, part_rms = fit_rigid_transform(sub_points, sub.target_points)
        part_results.append(PartPoseEstimate(
            name=part.name, pose=part_rt.inverse() @ canon_frame,
            mode="fitted", pixels=n_px, residual_rms=part_rms))

    return PoseResult(object_pose=object_pose,
                      solver_transform=solver_transform,
                      residual_rms=rms, inlier_count=corr.count,
                      part_poses=part_results)
