import json

import numpy as np
import pytest
from click.testing import CliRunner

from canonmap import RigidPose, load_annotations, load_geodesic_cache
from canonmap.cli import main
from canonmap.mesh_io import save_obj, save_ply
from canonmap.meshgen import warped_sphere


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Mesh file + annotations + parts, built once through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    mesh = warped_sphere(2, scale=0.12)
    mesh_path = root / "blob.ply"
    save_ply(mesh_path, mesh.vertices, mesh.faces)
    runner = CliRunner()
    result = runner.invoke(main, ["annotate", "--mesh", str(mesh_path)])
    assert result.exit_code == 0, result.output
    annot_path = root / "blob.ply.annot.json"
    assert annot_path.exists()

    parts_path = root / "parts.json"
    seed = int(np.argmax(mesh.vertices[:, 0]))
    result = runner.invoke(main, [
        "parts", "define", "--mesh", str(mesh_path), "--parts",
        str(parts_path), "--seed", str(seed), "--threshold", "0.06",
        "--name", "arm"])
    assert result.exit_code == 0, result.output
    return {"root": root, "mesh": mesh, "mesh_path": mesh_path,
            "annot_path": annot_path, "parts_path": parts_path}


def test_annotate_idempotent_bytes(workspace):
    runner = CliRunner()
    first = workspace["annot_path"].read_bytes()
    result = runner.invoke(main, ["annotate", "--mesh",
                                  str(workspace["mesh_path"])])
    assert result.exit_code == 0
    assert workspace["annot_path"].read_bytes() == first


def test_annotate_writes_valid_bundle(workspace):
    annotations = load_annotations(workspace["annot_path"],
                                   workspace["mesh"])
    assert annotations.table.vertex_count == 162
    assert annotations.table.dimension == 16
    assert annotations.table.provenance == "spectral"
    assert annotations.eigenvalues is not None


def test_annotate_geo_cache(workspace):
    runner = CliRunner()
    result = runner.invoke(main, ["annotate", "--mesh",
                                  str(workspace["mesh_path"]), "--geo-cache"])
    assert result.exit_code == 0
    cache = load_geodesic_cache(str(workspace["mesh_path"]) + ".geo.bin")
    assert cache.shape == (162, 162)
    assert np.allclose(np.diag(cache), 0.0)
    assert np.isfinite(cache).all()


def test_annotate_disconnected_exit_3(tmp_path):
    path = tmp_path / "two.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 9 9 9\nv 8 9 9\nv 9 8 9\n"
                    "f 1 2 3\nf 4 5 6\n")
    runner = CliRunner()
    result = runner.invoke(main, ["annotate", "--mesh", str(path)])
    assert result.exit_code == 3
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ValidationError"


def test_annotate_malformed_exit_2(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 zako\n")
    runner = CliRunner()
    result = runner.invoke(main, ["annotate", "--mesh", str(path)])
    assert result.exit_code == 2
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ParseError"


def test_parts_define_appears_in_file(workspace):
    doc = json.loads(workspace["parts_path"].read_text())
    assert doc["parts"][0]["name"] == "arm"
    assert doc["parts"][0]["threshold_m"] == 0.06
    assert len(doc["parts"][0]["members"]) > 1


def test_parts_define_dry_run_matches_saved(workspace):
    runner = CliRunner()
    doc = json.loads(workspace["parts_path"].read_text())
    entry = doc["parts"][0]
    result = runner.invoke(main, [
        "parts", "define", "--mesh", str(workspace["mesh_path"]),
        "--parts", str(workspace["root"] / "scratch.json"),
        "--seed", str(entry["seed"]), "--threshold",
        str(entry["threshold_m"]), "--name", "arm", "--dry-run"])
    assert result.exit_code == 0
    preview = json.loads(result.output)
    assert preview["members"] == entry["members"]


def test_simulate_deterministic(workspace):
    runner = CliRunner()
    cfg = {
        "object_pose": RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)).to_list(),
        "camera": {"fx": 600, "fy": 600, "cx": 320, "cy": 240,
                   "width": 640, "height": 480},
        "pixel_budget": 80,
        "embedding_noise": 0.05,
        "outlier_rate": 0.1,
        "rng_seed": 5,
    }
    cfg_path = workspace["root"] / "scenario.json"
    cfg_path.write_text(json.dumps(cfg))
    outputs = []
    for name in ("s1", "s2"):
        out = workspace["root"] / name
        result = runner.invoke(main, [
            "simulate", "--mesh", str(workspace["mesh_path"]),
            "--annotations", str(workspace["annot_path"]),
            "--config", str(cfg_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append((out.with_suffix(".obs.json").read_bytes(),
                        out.with_suffix(".truth.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_simulate_batch_config(workspace):
    runner = CliRunner()
    base = {
        "object_pose": RigidPose.from_rt(np.eye(3), (0.0, 0.0, 0.7)).to_list(),
        "camera": {"fx": 600, "fy": 600, "cx": 320, "cy": 240,
                   "width": 640, "height": 480},
        "pixel_budget": 40,
    }
    batch = [dict(base, rng_seed=1), dict(base, rng_seed=2),
             dict(base, rng_seed=3)]
    cfg_path = workspace["root"] / "batch.json"
    cfg_path.write_text(json.dumps(batch))
    out = workspace["root"] / "batch"
    result = runner.invoke(main, [
        "simulate", "--mesh", str(workspace["mesh_path"]),
        "--annotations", str(workspace["annot_path"]),
        "--config", str(cfg_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    for idx in range(3):
        obs = json.loads((workspace["root"] / f"batch-{idx:03d}.obs.json")
                         .read_text())
        assert len(obs["pixels"]) == 40
    # different seeds, different draws
    a = (workspace["root"] / "batch-000.obs.json").read_bytes()
    b = (workspace["root"] / "batch-001.obs.json").read_bytes()
    assert a != b


def test_estimate_on_simulated_observation(workspace):
    runner = CliRunner()
    cfg = {
        "object_pose": RigidPose.from_rt(np.eye(3), (0.01, 0.0, 0.72)).to_list(),
        "camera": {"fx": 600, "fy": 600, "cx": 320, "cy": 240,
                   "width": 640, "height": 480},
        "pixel_budget": 120,
        "rng_seed": 6,
    }
    cfg_path = workspace["root"] / "noiseless.json"
    cfg_path.write_text(json.dumps(cfg))
    out = workspace["root"] / "case"
    result = runner.invoke(main, [
        "simulate", "--mesh", str(workspace["mesh_path"]),
        "--annotations", str(workspace["annot_path"]),
        "--parts", str(workspace["parts_path"]),
        "--config", str(cfg_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    pose_path = workspace["root"] / "pose.json"
    result = runner.invoke(main, [
        "estimate", "--obs", str(out) + ".obs.json",
        "--mesh", str(workspace["mesh_path"]),
        "--annotations", str(workspace["annot_path"]),
        "--parts", str(workspace["parts_path"]),
        "--truth", str(out) + ".truth.json",
        "--theta0", "1e-9", "--out", str(pose_path)])
    assert result.exit_code == 0, result.output
    doc = json.loads(pose_path.read_text())
    assert doc["rot_err_rad"] < 1e-6
    assert doc["trans_err_m"] < 1e-6
    truth = json.loads(open(str(out) + ".truth.json").read())
    est = RigidPose.from_list(doc["object_pose"])
    ref = RigidPose.from_list(truth["object_pose"])
    assert est.almost_equal(ref, tol=1e-6)
    assert {p["name"] for p in doc["parts"]} == {"arm"}


def test_evaluate_deterministic_csv(workspace):
    runner = CliRunner()
    csvs = []
    for name in ("r1", "r2"):
        out = workspace["root"] / name
        result = runner.invoke(main, [
            "evaluate", "--mesh", str(workspace["mesh_path"]),
            "--annotations", str(workspace["annot_path"]),
            "--parts", str(workspace["parts_path"]),
            "--trials", "6", "--seed", "99", "--theta0", "1e-9",
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        csvs.append((out.with_suffix(".csv")).read_bytes())
    assert csvs[0] == csvs[1]


def test_evaluate_aggregates_recomputable(workspace):
    out = workspace["root"] / "r1"
    report = json.loads(out.with_suffix(".json").read_text())
    rows = report["rows"]
    agg = report["aggregates"]
    assert agg["trials"] == len(rows)
    ok = [r["success"] for r in rows]
    assert agg["success_rate"] == pytest.approx(np.mean(ok))
    rots = [r["rot_err_rad"] for r in rows if r["error"] is None]
    assert agg["rot_err_rad"]["mean"] == pytest.approx(np.mean(rots))
    assert agg["rot_err_rad"]["median"] == pytest.approx(np.median(rots))
    # CSV rows carry the same numbers
    lines = out.with_suffix(".csv").read_text().splitlines()
    assert lines[0].startswith("# canonmap-eval-csv")
    header = lines[1].split(",")
    first = lines[2].split(",")
    assert float(first[header.index("rot_err_rad")]) == \
        pytest.approx(rows[0]["rot_err_rad"])


def test_evaluate_noiseless_success_rate(workspace):
    out = workspace["root"] / "r1"
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["aggregates"]["success_rate"] == 1.0


def test_zero_thresholds_zero_success(workspace):
    runner = CliRunner()
    out = workspace["root"] / "r0"
    result = runner.invoke(main, [
        "evaluate", "--mesh", str(workspace["mesh_path"]),
        "--annotations", str(workspace["annot_path"]),
        "--trials", "4", "--seed", "7", "--theta0", "1e-9",
        "--rot-thresh-deg", "0", "--trans-thresh-m", "0",
        "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["aggregates"]["success_rate"] == 0.0
