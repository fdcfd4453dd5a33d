"""Batch evaluation: seeded scenario trials, error metrics, report files.

Each trial generates one synthetic observation, runs the pose pipeline, and
scores the estimate against ground truth. Reports are written as JSON (full,
including timings) and CSV (deterministic columns only, so repeated runs
with the same master seed are byte-identical; wall-clock timing never goes
in the CSV).
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CanonmapError, ValidationError
from .geometry import RigidPose, pose_errors
from .mesh_core import CanonicalMesh
from .parts import PartDefinition
from .pose import PipelineConfig, solve_poses
from .spectral import VertexEmbeddingTable
from .synth import ScenarioConfig, generate_observation

CSV_VERSION = "canonmap-eval-csv v1"
THREADS_ENV = "CANONMAP_THREADS"


@dataclass
class EvalSetup:
    """Scenario template plus pose randomization bounds for a batch."""

    template: ScenarioConfig
    randomize_pose: bool = True
    translation_low: tuple = (-0.08, -0.08, 0.55)
    translation_high: tuple = (0.08, 0.08, 0.95)

    @classmethod
    def from_json(cls, obj: dict) -> "EvalSetup":
        scenario = dict(obj.get("scenario", {}))
        if "object_pose" not in scenario:
            scenario["object_pose"] = RigidPose.identity().to_list()
        if "camera" not in scenario:
            from .synth import default_intrinsics
            scenario["camera"] = default_intrinsics().to_json()
        return cls(
            template=ScenarioConfig.from_json(scenario),
            randomize_pose=bool(obj.get("randomize_pose", True)),
            translation_low=tuple(obj.get("translation_low",
                                          (-0.08, -0.08, 0.55))),
            translation_high=tuple(obj.get("translation_high",
                                           (0.08, 0.08, 0.95))),
        )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized quaternion draw."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass
class TrialRow:
    scenario_id: int
    seed: int
    success: int
    rot_err_rad: float
    trans_err_m: float
    residual_rms: float
    n_pixels: int
    n_kept: int
    part_stats: dict = field(default_factory=dict)  # name -> dict
    timing_ms: float = 0.0
    error: str | None = None


@dataclass
class TrialReport:
    rows: list
    part_names: list
    rot_thresh_rad: float
    trans_thresh_m: float

    def aggregates(self) -> dict:
        succ = [r.success for r in self.rows]
        rot = np.asarray([r.rot_err_rad for r in self.rows if r.error is None])
        trans = np.asarray([r.trans_err_m for r in self.rows if r.error is None])
        agg = {
            "trials": len(self.rows),
            "failures": sum(1 for r in self.rows if r.error is not None),
            "success_rate": float(np.mean(succ)) if succ else 0.0,
        }
        for name, vals in (("rot_err_rad", rot), ("trans_err_m", trans)):
            if len(vals):
                agg[name] = {"mean": float(vals.mean()),
                             "median": float(np.median(vals)),
                             "p95": float(np.percentile(vals, 95))}
            else:
                agg[name] = {"mean": float("nan"), "median": float("nan"),
                             "p95": float("nan")}
        return agg

    def to_json(self) -> dict:
        return {
            "csv_version": CSV_VERSION,
            "rot_thresh_rad": self.rot_thresh_rad,
            "trans_thresh_m": self.trans_thresh_m,
            "aggregates": self.aggregates(),
            "part_names": self.part_names,
            "rows": [
                {
                    "scenario_id": r.scenario_id, "seed": r.seed,
                    "success": r.success, "rot_err_rad": r.rot_err_rad,
                    "trans_err_m": r.trans_err_m,
                    "residual_rms": r.residual_rms, "n_pixels": r.n_pixels,
                    "n_kept": r.n_kept, "parts": r.part_stats,
                    "timing_ms": r.timing_ms, "error": r.error,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION}\n")
        writer = csv.writer(buf, lineterminator="\n")
        header = ["scenario_id", "seed", "success", "rot_err_rad",
                  "trans_err_m", "residual_rms", "n_pixels", "n_kept"]
        for name in self.part_names:
            header += [f"part={name}:mode", f"part={name}:rot_err_rad",
                       f"part={name}:trans_err_m", f"part={name}:pixels"]
        writer.writerow(header)
        for r in self.rows:
            row = [r.scenario_id, r.seed, r.success, repr(r.rot_err_rad),
                   repr(r.trans_err_m), repr(r.residual_rms), r.n_pixels,
                   r.n_kept]
            for name in self.part_names:
                st = r.part_stats.get(name)
                if st is None:
                    row += ["", "nan", "nan", 0]
                else:
                    row += [st["mode"], repr(st["rot_err_rad"]),
                            repr(st["trans_err_m"]), st["pixels"]]
            writer.writerow(row)
        return buf.getvalue()


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def run_evaluation(mesh: CanonicalMesh, table: VertexEmbeddingTable,
                   parts: list[PartDefinition], setup: EvalSetup,
                   trials: int, master_seed: int,
                   rot_thresh_rad: float, trans_thresh_m: float,
                   pipeline: PipelineConfig | None = None) -> TrialReport:
    """Run `trials` seeded scenarios and score them against ground truth."""
    pipeline = pipeline or PipelineConfig()
    part_map = {p.name: p for p in parts}
    part_names = sorted(part_map)
    seed_seq = np.random.SeedSequence(master_seed)
    trial_seeds = [int(s.generate_state(1)[0]) for s in seed_seq.spawn(trials)]

    def run_one(idx: int) -> TrialRow:
        seed = trial_seeds[idx]
        rng = np.random.default_rng(seed)
        template = setup.template
        if setup.randomize_pose:
            rot = random_rotation(rng)
            t = rng.uniform(np.asarray(setup.translation_low),
                            np.asarray(setup.translation_high))
            pose = RigidPose.from_rt(rot, t, check=False)
            frame = "camera"
        else:
            pose = template.object_pose
            frame = template.pose_frame
        cfg = ScenarioConfig(
            object_pose=pose, camera=template.camera, pose_frame=frame,
            extrinsics=template.extrinsics,
            pixel_budget=template.pixel_budget,
            embedding_noise=template.embedding_noise,
            outlier_rate=template.outlier_rate,
            depth_noise=template.depth_noise,
            articulations=template.articulations,
            deformation_jitter=template.deformation_jitter,
            rng_seed=seed)
        start = time.perf_counter()
        try:
            synthetic = generate_observation(mesh, table, part_map, cfg)
            result = solve_poses(synthetic.observation, mesh, table,
                                 list(parts), pipeline)
        except CanonmapError as exc:
            return TrialRow(scenario_id=idx, seed=seed, success=0,
                            rot_err_rad=float("nan"),
                            trans_err_m=float("nan"),
                            residual_rms=float("nan"), n_pixels=0, n_kept=0,
                            timing_ms=(time.perf_counter() - start) * 1e3,
                            error=f"{type(exc).__name__}: {exc}")
        rot_err, trans_err = pose_errors(result.object_pose,
                                         synthetic.true_object_pose)
        stats = {}
        for entry in result.part_poses:
            p_rot, p_trans = pose_errors(entry.pose,
                                         synthetic.true_part_poses[entry.name])
            stats[entry.name] = {"mode": entry.mode, "rot_err_rad": p_rot,
                                 "trans_err_m": p_trans,
                                 "pixels": entry.pixels}
        ok = int(rot_err < rot_thresh_rad and trans_err < trans_thresh_m)
        return TrialRow(scenario_id=idx, seed=seed, success=ok,
                        rot_err_rad=rot_err, trans_err_m=trans_err,
                        residual_rms=result.residual_rms,
                        n_pixels=synthetic.observation.pixel_count,
                        n_kept=result.inlier_count, part_stats=stats,
                        timing_ms=(time.perf_counter() - start) * 1e3)

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, range(trials)))
    else:
        rows = [run_one(i) for i in range(trials)]
    rows.sort(key=lambda r: r.scenario_id)
    return TrialReport(rows=rows, part_names=part_names,
                       rot_thresh_rad=rot_thresh_rad,
                       trans_thresh_m=trans_thresh_m)


def write_report(report: TrialReport, json_path, csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=1)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
