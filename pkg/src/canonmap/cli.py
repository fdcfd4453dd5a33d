"""Command line front end.

Exit codes: 0 ok, 2 parse failure, 3 validation failure, 4 numeric failure.
Errors are also emitted as one JSON object on stderr so harnesses can parse
them: {"error": <class name>, "message": <text>}.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import annotations as annot_io
from .errors import CanonmapError, exit_code_for
from .geometry import pose_errors
from .mesh_core import (
    GeodesicTable,
    assign_canonical_frame,
    build_edge_graph,
    compute_symmetry_map,
    mesh_checksum,
    parse_mesh,
)
from .parts import PartRegistry, grow_part, load_parts, save_parts
from .pose import PipelineConfig, solve_poses
from .report import EvalSetup, run_evaluation, write_report
from .spectral import lbo_embeddings
from .synth import ScenarioConfig, generate_observation, load_truth, \
    save_scenario_files
from .correspondence import Observation


def _fail(err: CanonmapError) -> None:
    sys.stderr.write(json.dumps({"error": type(err).__name__,
                                 "message": str(err)}) + "\n")
    sys.exit(exit_code_for(err))


def _guarded(fn):
    """Run a command body, translating CanonmapError into exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CanonmapError as exc:
            _fail(exc)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_bundle(mesh_path, annotations_path):
    mesh = parse_mesh(mesh_path)
    annotations = annot_io.load_annotations(annotations_path, mesh)
    return mesh, annotations


def _registry_parts(mesh, parts_path):
    if parts_path is None:
        return []
    geo = GeodesicTable(build_edge_graph(mesh))
    return load_parts(parts_path, mesh, geo).snapshot()


@click.group()
def main():
    """Canonical-mesh annotation, synthetic evaluation, and pose estimation."""


@main.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("-d", "--dim", default=16, show_default=True,
              help="Embedding dimension.")
@click.option("--symmetry-axis", default=0, show_default=True,
              help="Principal axis index for the mirror map.")
@click.option("--geo-cache", is_flag=True,
              help="Also write the all-pairs geodesic cache (<mesh>.geo.bin).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Defaults to <mesh>.annot.json.")
@_guarded
def annotate(mesh_path, dim, symmetry_axis, geo_cache, out_path):
    """Compute frame, symmetry, and spectral embeddings for a mesh."""
    mesh = parse_mesh(mesh_path)
    frame = assign_canonical_frame(mesh)
    symmetry = compute_symmetry_map(mesh, axis=symmetry_axis, frame=frame)
    table, spectrum = lbo_embeddings(mesh, d=dim)
    out = out_path or f"{mesh_path}.annot.json"
    annot_io.write_annotations(out, mesh, frame, symmetry, table, spectrum)
    click.echo(f"wrote {out} ({mesh.vertex_count}x{dim} embedding table)")
    if geo_cache:
        cache_path = f"{mesh_path}.geo.bin"
        annot_io.save_geodesic_cache(cache_path,
                                     GeodesicTable(build_edge_graph(mesh)))
        click.echo(f"wrote {cache_path}")


@main.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", type=click.Path(exists=True,
                                                       dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True,
                                                         dir_okay=False),
              required=True,
              help="ScenarioConfig JSON (one object, or an array for a batch).")
@click.option("--seed", type=int, default=None,
              help="Override the scenario rng_seed (batches use seed+index).")
@click.option("--out", "out_base", required=True,
              help="Writes <out>.obs.json and <out>.truth.json "
                   "(<out>-NNN.* for batches).")
@_guarded
def simulate(mesh_path, annotations_path, parts_path, config_path, seed,
             out_base):
    """Generate synthetic observations with ground truth."""
    mesh, annotations = _load_bundle(mesh_path, annotations_path)
    parts = {p.name: p for p in _registry_parts(mesh, parts_path)}
    doc = json.loads(Path(config_path).read_text())
    batch = doc if isinstance(doc, list) else [doc]
    for idx, entry in enumerate(batch):
        cfg = ScenarioConfig.from_json(entry)
        if seed is not None:
            cfg.rng_seed = seed + idx
        synthetic = generate_observation(mesh, annotations.table, parts, cfg)
        base = out_base if not isinstance(doc, list) else f"{out_base}-{idx:03d}"
        save_scenario_files(synthetic, f"{base}.obs.json",
                            f"{base}.truth.json")
        click.echo(f"wrote {base}.obs.json and {base}.truth.json "
                   f"({synthetic.observation.pixel_count} pixels)")


def _pipeline_options(fn):
    fn = click.option("--k", type=int, default=None,
                      help="Candidates per pixel.")(fn)
    fn = click.option("--theta0", type=float, default=None,
                      help="Absolute max embedding distance.")(fn)
    fn = click.option("--theta1", type=float, default=None,
                      help="Absolute above-median distance gate.")(fn)
    fn = click.option("--depth-mode", type=click.Choice(["sensor", "pairwise"]),
                      default="sensor", show_default=True)(fn)
    return fn


def _pipeline_config(k, theta0, theta1, depth_mode) -> PipelineConfig:
    cfg = PipelineConfig(depth_mode=depth_mode, theta0=theta0, theta1=theta1)
    if k is not None:
        cfg.k = k
    return cfg


@main.command()
@click.option("--obs", "obs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", type=click.Path(exists=True,
                                                       dir_okay=False))
@click.option("--truth", "truth_path", type=click.Path(exists=True,
                                                       dir_okay=False),
              help="Optional ground truth; adds error fields to the output.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@_pipeline_options
@_guarded
def estimate(obs_path, mesh_path, annotations_path, parts_path, truth_path,
             out_path, k, theta0, theta1, depth_mode):
    """Estimate object and part poses from an observation JSON."""
    mesh, annotations = _load_bundle(mesh_path, annotations_path)
    parts = _registry_parts(mesh, parts_path)
    obs = Observation.from_json(json.loads(Path(obs_path).read_text()))
    result = solve_poses(obs, mesh, annotations.table, parts,
                         _pipeline_config(k, theta0, theta1, depth_mode))
    doc = result.to_json()
    if truth_path:
        truth = load_truth(truth_path)
        rot_err, trans_err = pose_errors(result.object_pose,
                                         truth["object_pose"])
        doc["rot_err_rad"] = rot_err
        doc["trans_err_m"] = trans_err
    text = json.dumps(doc, sort_keys=True, indent=1)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)


@main.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", type=click.Path(exists=True,
                                                       dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True,
                                                         dir_okay=False),
              help="EvalSetup JSON (scenario template + pose randomization).")
@click.option("--trials", type=int, default=25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed; per-trial seeds derive from it.")
@click.option("--rot-thresh-deg", type=float, default=5.0, show_default=True)
@click.option("--trans-thresh-m", type=float, default=0.01, show_default=True)
@click.option("--out", "out_base", required=True,
              help="Writes <out>.json and <out>.csv.")
@_pipeline_options
@_guarded
def evaluate(mesh_path, annotations_path, parts_path, config_path, trials,
             seed, rot_thresh_deg, trans_thresh_m, out_base, k, theta0, theta1,
             depth_mode):
    """Run a batch of seeded scenarios and report error statistics."""
    mesh, annotations = _load_bundle(mesh_path, annotations_path)
    parts = _registry_parts(mesh, parts_path)
    setup = EvalSetup.from_json(
        json.loads(Path(config_path).read_text()) if config_path else {})
    report = run_evaluation(
        mesh, annotations.table, parts, setup, trials=trials,
        master_seed=seed, rot_thresh_rad=np.deg2rad(rot_thresh_deg),
        trans_thresh_m=trans_thresh_m,
        pipeline=_pipeline_config(k, theta0, theta1, depth_mode))
    write_report(report, f"{out_base}.json", f"{out_base}.csv")
    agg = report.aggregates()
    click.echo(f"wrote {out_base}.json and {out_base}.csv "
               f"(success rate {agg['success_rate']:.3f})")


@main.group()
def parts():
    """Inspect and edit the parts file."""


def _parts_registry(mesh_path, parts_path, create=False):
    mesh = parse_mesh(mesh_path)
    geo = GeodesicTable(build_edge_graph(mesh))
    if Path(parts_path).exists():
        return mesh, geo, load_parts(parts_path, mesh, geo)
    if not create:
        raise click.ClickException(f"parts file {parts_path} does not exist")
    return mesh, geo, PartRegistry(mesh, geo)


@parts.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--threshold", type=float, required=True, help="Meters.")
@click.option("--name", required=True)
@click.option("--dry-run", is_flag=True,
              help="Print the member set without saving.")
@_guarded
def define(mesh_path, parts_path, seed, threshold, name, dry_run):
    """Grow a part from a seed vertex and store it."""
    mesh, geo, registry = _parts_registry(mesh_path, parts_path, create=True)
    if dry_run:
        part = grow_part(mesh, geo, seed, threshold, name)
        click.echo(json.dumps({
            "name": part.name, "members": [int(i) for i in part.members],
            "centroid": [float(x) for x in part.centroid]}, sort_keys=True))
        return
    part = registry.define(name, seed, threshold)
    save_parts(registry, parts_path)
    click.echo(f"defined {name!r}: {len(part.members)} vertices")


@parts.command("list")
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_guarded
def list_parts(mesh_path, parts_path):
    """Print the registry as JSON."""
    _, _, registry = _parts_registry(mesh_path, parts_path)
    click.echo(json.dumps(
        {"mesh_checksum": registry.checksum,
         "parts": [p.to_json() for p in registry.snapshot()]},
        sort_keys=True, indent=1))


@parts.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--name", required=True)
@_guarded
def remove(mesh_path, parts_path, name):
    """Delete one part by name."""
    _, _, registry = _parts_registry(mesh_path, parts_path)
    registry.remove(name)
    save_parts(registry, parts_path)
    click.echo(f"removed {name!r}")


@main.command()
@click.option("--mesh", "mesh_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--parts", "parts_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--port", type=int, default=7878, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--frontend", "frontend_dir",
              type=click.Path(exists=True, file_okay=False), default=None,
              help="Static bundle directory to serve at /.")
@_guarded
def serve(mesh_path, annotations_path, parts_path, port, host, frontend_dir):
    """Serve the part-selection API (and optional UI bundle)."""
    import uvicorn

    from .server import build_session, create_app

    state = build_session(mesh_path, parts_path,
                          annotations_path=annotations_path)
    app = create_app(state, frontend_dir=frontend_dir)
    click.echo(f"mesh {mesh_path} ({state.mesh.vertex_count} vertices, "
               f"checksum {mesh_checksum(state.mesh)})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
